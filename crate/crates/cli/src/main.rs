use auglimb_cli::{run, Cli, CliError};
use clap::Parser;

fn main() {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(out) => print!("{out}"),
        Err(err) => {
            if let CliError::IkFailed(report) = &err {
                print!("{report}");
            }
            eprintln!("error: {err}");
            std::process::exit(err.exit_code());
        }
    }
}
