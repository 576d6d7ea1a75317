use std::io::Write;
use std::panic;
use std::process::ExitCode;

use srq_core::cli;

fn main() -> ExitCode {
    let threads = match cli::thread_count_from_env() {
        Ok(n) => n,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(1);
        }
    };
    if threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }

    let outcome = panic::catch_unwind(|| {
        let stdout = std::io::stdout();
        let stderr = std::io::stderr();
        let mut out = stdout.lock();
        let mut err = stderr.lock();
        let code = cli::run(std::env::args_os(), &mut out, &mut err);
        let _ = out.flush();
        code
    });
    match outcome {
        Ok(code) => ExitCode::from(code as u8),
        // A panic is a broken invariant; the hook has already printed it.
        Err(_) => ExitCode::from(2),
    }
}
