use std::process::ExitCode;

fn main() -> ExitCode {
    match deepacts::cli::run(std::env::args_os()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.one_line());
            ExitCode::from(if e.kind() == "usage" { 2 } else { 1 })
        }
    }
}
