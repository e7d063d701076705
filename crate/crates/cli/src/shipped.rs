//! Scenarios compiled into the binary, plus optional user directories.

use std::path::{Path, PathBuf};

use crate::error::{CliError, Result};

pub const SHIPPED: [(&str, &str); 3] = [
    ("convexity-suite", include_str!("../scenarios/convexity-suite.toml")),
    ("functionals", include_str!("../scenarios/functionals.toml")),
    ("hirzebruch-slope", include_str!("../scenarios/hirzebruch-slope.toml")),
];

fn custom_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| CliError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    files.sort();
    Ok(files)
}

/// Shipped names followed by the `*.toml` stems found in `custom`.
pub fn list_scenarios(custom: Option<&Path>) -> Result<Vec<String>> {
    let mut names: Vec<String> = SHIPPED.iter().map(|(n, _)| n.to_string()).collect();
    if let Some(dir) = custom {
        for f in custom_files(dir)? {
            if let Some(stem) = f.file_stem().and_then(|s| s.to_str()) {
                if !names.iter().any(|n| n == stem) {
                    names.push(stem.to_string());
                }
            }
        }
    }
    Ok(names)
}

/// Resolve a scenario argument to `(text, origin)`: an existing file path,
/// then a `*.toml` in the custom directory, then a shipped name.
pub fn load_text(arg: &str, custom: Option<&Path>) -> Result<(String, String)> {
    let read = |p: &Path| std::fs::read_to_string(p).map_err(|e| CliError::io(p, e));
    let path = Path::new(arg);
    if path.is_file() {
        return Ok((read(path)?, arg.to_string()));
    }
    if let Some(dir) = custom {
        let p = dir.join(format!("{arg}.toml"));
        if p.is_file() {
            return Ok((read(&p)?, p.display().to_string()));
        }
    }
    SHIPPED
        .iter()
        .find(|(n, _)| *n == arg)
        .map(|(n, text)| (text.to_string(), format!("<shipped:{n}>")))
        .ok_or_else(|| CliError::UnknownScenario(arg.into()))
}
