//! Rewrites the JSON files under `fixtures/` from their builders.

use std::path::Path;

use causal_oed::fixtures::{build, FIXTURE_NAMES};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    std::fs::create_dir_all(&dir)?;
    for name in FIXTURE_NAMES {
        let net = build(name)?;
        let path = dir.join(format!("{name}.json"));
        std::fs::write(&path, net.to_json()? + "\n")?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
