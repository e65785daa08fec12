//! Rebuilds `data/lang/profiles/<lang>.profile` from `data/lang/corpus/<lang>.txt`.
//!
//!     cargo run -p altgen-core --example build_profiles

use std::fs;
use std::path::Path;

use altgen_core::lang::LanguageProfile;

fn main() -> std::io::Result<()> {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/lang");
    let out_dir = root.join("profiles");
    fs::create_dir_all(&out_dir)?;
    let mut corpora: Vec<_> = fs::read_dir(root.join("corpus"))?
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|e| e == "txt"))
        .collect();
    corpora.sort();
    for path in corpora {
        let lang = path.file_stem().unwrap().to_string_lossy().into_owned();
        let profile = LanguageProfile::from_text(&lang, &fs::read_to_string(&path)?);
        let target = out_dir.join(format!("{lang}.profile"));
        fs::write(&target, profile.to_file_contents())?;
        println!("{lang}: {} trigrams -> {}", profile.ranked_trigrams.len(), target.display());
    }
    Ok(())
}
