use std::fs;
use std::path::PathBuf;

use emac_core::emit::{compile, CompileOptions};
use emac_core::parser::{load_model_document, load_spec_document};

/// Compiled checkout outputs are byte-for-byte the checked-in ones.
/// Set `EMAC_UPDATE_GOLDEN=1` to rewrite them after an intended change.
#[test]
fn checkout_outputs_match_golden_files() {
    let spec = load_spec_document(include_bytes!("../fixtures/checkout.spec.yaml")).unwrap().value;
    let model = load_model_document(include_bytes!("../fixtures/checkout.model.yaml")).unwrap().value;
    let bundle = compile(&spec, &model, &CompileOptions::default()).unwrap();
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/checkout");
    let update = std::env::var_os("EMAC_UPDATE_GOLDEN").is_some();
    if update {
        fs::create_dir_all(&dir).unwrap();
    }
    for (file, text) in bundle.files() {
        let path = dir.join(file);
        if update {
            fs::write(&path, text).unwrap();
            continue;
        }
        let want = fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert!(want == text, "{file} differs from {}", path.display());
    }
}
