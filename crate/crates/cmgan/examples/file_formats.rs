//! Exercise the two on-disk dataset encodings — the CMGF binary format and
//! CSV — plus the typed errors produced for corrupt files.

use std::io::Write;

use cmgan::data::{generate_synthetic, load_dataset, read_cmgf, save_dataset, FileFormat, SynthSpec};
use cmgan::Error;

fn main() -> cmgan::Result<()> {
    let dataset = generate_synthetic(&SynthSpec {
        classes: 3,
        per_class: 10,
        ..SynthSpec::default()
    })?;

    let dir = std::env::temp_dir().join("cmgan-example-formats");
    for format in [FileFormat::Cmgf, FileFormat::Csv] {
        let manifest = save_dataset(&dataset, &dir, "demo", format)?;
        let reloaded = load_dataset(&manifest)?;
        println!(
            "{format:?}: saved and reloaded {} pairs via {}",
            reloaded.len(),
            manifest.display()
        );
    }

    // Truncate the binary image block mid-payload: the reader names the
    // offending byte offset.
    let cmgf = dir.join("demo.img.cmgf");
    let bytes = std::fs::read(&cmgf).unwrap();
    let cut = dir.join("truncated.cmgf");
    std::fs::File::create(&cut)
        .unwrap()
        .write_all(&bytes[..bytes.len() / 2])
        .unwrap();
    match read_cmgf(&cut) {
        Err(e @ Error::Format { .. }) => println!("truncated file rejected: {e}"),
        other => panic!("expected a format error, got {other:?}"),
    }

    // Flip the magic: rejected before any payload is read.
    let mut bad = bytes.clone();
    bad[0] = b'X';
    let bad_path = dir.join("bad_magic.cmgf");
    std::fs::write(&bad_path, &bad).unwrap();
    match read_cmgf(&bad_path) {
        Err(e @ Error::Format { .. }) => println!("bad magic rejected: {e}"),
        other => panic!("expected a format error, got {other:?}"),
    }
    Ok(())
}
