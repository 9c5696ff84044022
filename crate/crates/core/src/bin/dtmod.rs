use std::process::ExitCode;

fn main() -> ExitCode {
    let code = dtmod::cli::run(std::env::args_os(), std::env::var("DTMOD_SEED").ok(), &mut std::io::stdout(), &mut std::io::stderr());
    ExitCode::from(code as u8)
}
