use clap::Parser;
use kcnet_cli::{dispatch, exit, Cli};

fn main() {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(cli.log_level())
        .parse_env("KCNET_LOG")
        .format_timestamp_secs()
        .init();
    let code = match dispatch(cli) {
        Ok(()) => exit::OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}
