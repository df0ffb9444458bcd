//! Model presets shipped as JSON training configs under `presets/`.

pub const NAMES: [&str; 7] = ["m1", "m2", "m3", "m4", "m5", "m6", "tiny"];

pub fn get(name: &str) -> Option<&'static str> {
    Some(match name.to_ascii_lowercase().as_str() {
        "m1" => include_str!("../presets/m1.json"),
        "m2" => include_str!("../presets/m2.json"),
        "m3" => include_str!("../presets/m3.json"),
        "m4" => include_str!("../presets/m4.json"),
        "m5" => include_str!("../presets/m5.json"),
        "m6" => include_str!("../presets/m6.json"),
        "tiny" => include_str!("../presets/tiny.json"),
        _ => return None,
    })
}
