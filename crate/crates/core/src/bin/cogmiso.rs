use std::process::ExitCode;

fn main() -> ExitCode {
    let cmd = match cogmiso::cli::parse_args(std::env::args_os()) {
        Ok(cmd) => cmd,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    ExitCode::from(cogmiso::cli::run(&cmd) as u8)
}
