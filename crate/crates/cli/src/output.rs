use std::fmt::Display;
use std::io::Write;
use std::path::PathBuf;

use crate::CliError;

/// Buffered output: a comment block echoing the effective run
/// configuration, then the body. Written to a file or stdout at the end.
pub struct Output {
    text: String,
}

impl Output {
    pub fn new(command: &str, config: &[(&str, String)]) -> Self {
        let mut text = format!("# smm {}\n# command = {command}\n", env!("CARGO_PKG_VERSION"));
        let mut sorted: Vec<_> = config.iter().collect();
        sorted.sort_by_key(|(k, _)| *k);
        for (k, v) in sorted {
            text.push_str(&format!("# {k} = {v}\n"));
        }
        Self { text }
    }

    pub fn line(&mut self, s: impl Display) {
        self.text.push_str(&s.to_string());
        self.text.push('\n');
    }

    pub fn comment(&mut self, s: impl Display) {
        self.line(format_args!("# {s}"));
    }

    pub fn finish(self, out: &Option<PathBuf>) -> Result<(), CliError> {
        match out {
            Some(path) => std::fs::write(path, self.text)
                .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display()))),
            None => std::io::stdout().write_all(self.text.as_bytes()).map_err(|e| CliError::Runtime(e.to_string())),
        }
    }
}

/// `Some(v)` as its value, `None` as an empty CSV cell.
pub fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}
