use std::path::Path;

use koethe::commands::catalog_files;

/// `KOETHE_BLESS=1 cargo test -p koethe --test configs` rewrites the shipped files.
#[test]
fn shipped_configs_match_catalog() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let files = catalog_files();
    if std::env::var_os("KOETHE_BLESS").is_some() {
        std::fs::create_dir_all(&dir).unwrap();
        for (name, text) in &files {
            std::fs::write(dir.join(name), text).unwrap();
        }
    }
    let mut on_disk: Vec<String> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".json"))
        .collect();
    on_disk.sort();
    assert_eq!(on_disk, files.keys().cloned().collect::<Vec<_>>());
    for (name, text) in &files {
        assert_eq!(&std::fs::read_to_string(dir.join(name)).unwrap(), text, "{name} is stale");
    }
}

#[test]
fn shipped_configs_load_and_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    for name in catalog_files().keys() {
        let c = koethe::config::load(&dir.join(name)).unwrap();
        koethe::config::build_validated(&c, 1000).unwrap();
    }
}
