//! Regenerates `assets/affect_assets.json`:
//! `cargo run -p affectsim-core --example dump_assets > crates/core/assets/affect_assets.json`
fn main() {
    print!("{}", affectsim_core::affect::assets_json());
}
