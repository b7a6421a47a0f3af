use clap::Parser;

use artopen::app::{error_json, run, Cli, Outcome};

fn main() {
    let cli = Cli::parse();
    let code = match run(&cli) {
        Ok(Outcome::Success) => 0,
        Ok(o @ Outcome::Infeasible(_)) => {
            eprintln!("{}", o.status_json());
            o.exit_code()
        }
        Err(e) => {
            eprintln!("{}", error_json(&e));
            e.exit_code()
        }
    };
    std::process::exit(code);
}
