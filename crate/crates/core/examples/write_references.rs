//! Regenerates the shipped labeled references under `assets/references/`.

use std::path::Path;

use revgrasp::posture::build_reference;
use revgrasp::Category;

fn main() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("assets/references");
    std::fs::create_dir_all(&dir).expect("create assets dir");
    for c in [Category::Cup, Category::Bottle, Category::Bowl] {
        let path = dir.join(format!("{}.ply", c.name()));
        build_reference(c).save(&path).expect("write reference");
        println!("wrote {}", path.display());
    }
}
