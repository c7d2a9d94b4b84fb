#![allow(dead_code)]

use std::path::PathBuf;

pub fn workspace() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn recipe_dir() -> PathBuf {
    workspace().join("recipes")
}

pub fn toy_recipes() -> Vec<tagbench::Recipe> {
    tagbench::load_recipe_file(&recipe_dir().join("toy.toml"), None).unwrap()
}

pub fn toy(name: &str) -> tagbench::Recipe {
    toy_recipes().into_iter().find(|r| r.name == name).unwrap()
}
