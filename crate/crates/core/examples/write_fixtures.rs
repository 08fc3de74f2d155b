//! Regenerates the JSON files under `fixtures/`.
//!
//! ```text
//! cargo run --example write_fixtures [DIR]
//! ```

use std::path::PathBuf;

fn main() -> dialogue_eval::Result<()> {
    let dir = std::env::args_os()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures"));
    std::fs::create_dir_all(&dir)?;
    for (name, text) in dialogue_eval::fixtures::bundled()? {
        std::fs::write(dir.join(name), text)?;
        println!("{}", dir.join(name).display());
    }
    Ok(())
}
