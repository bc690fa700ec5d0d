use std::process::ExitCode;

use gkmod_cli::{commands, config, emit, set_threads};

// 0: all checks passed, 1: a check failed, 2: bad configuration, 3: run error.
fn main() -> ExitCode {
    let (cfg, warnings) = match config::parse_config(std::env::args_os()) {
        Ok(v) => v,
        Err(e) => {
            if let Some(ce) = e.downcast_ref::<clap::Error>() {
                let _ = ce.print();
                return if ce.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
            }
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    if let Err(e) = set_threads(cfg.usize("threads")) {
        eprintln!("error: {e:#}");
        return ExitCode::from(3);
    }
    let rep = match commands::run(&cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {} failed: {e:#}", cfg.command);
            return ExitCode::from(3);
        }
    };
    match emit(&cfg, &rep) {
        Ok(Some(p)) => eprintln!("wrote {}", p.display()),
        Ok(None) => {}
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(3);
        }
    }
    for c in &rep.checks {
        eprintln!("{} {} (value {:e}, tolerance {:e})", if c.passed { "pass" } else { "FAIL" }, c.name, c.value, c.tolerance);
    }
    if rep.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
