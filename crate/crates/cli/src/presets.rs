//! Configurations bundled into the binary.

const PRESETS: &[(&[&str], &str)] = &[
    (&["cell2-sigma-f4"], include_str!("../presets/cell2-sigma-f4.toml")),
    (&["cell2-linlin-f3-b285"], include_str!("../presets/cell2-linlin-f3-b285.toml")),
    (&["trap-populations", "fig9"], include_str!("../presets/trap-populations.toml")),
    (&["width-curves", "fig8-widths"], include_str!("../presets/width-curves.toml")),
];

pub fn get(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(names, _)| names.contains(&name)).map(|(_, text)| *text)
}

/// Every accepted name, aliases included.
pub fn names() -> Vec<&'static str> {
    PRESETS.iter().flat_map(|(names, _)| names.iter().copied()).collect()
}
