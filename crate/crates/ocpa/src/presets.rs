//! Desk-scale presets, one per acceptance setting.

use crate::config::{ConfigError, LoadedConfig};

macro_rules! presets {
    ($($name:literal),* $(,)?) => {
        pub const PRESETS: &[(&str, &str)] = &[
            $(($name, include_str!(concat!("../presets/", $name, ".toml")))),*
        ];
    };
}

presets!(
    "kernel-check",
    "ehm-check",
    "simulate",
    "oracle-compare",
    "moments-linear",
    "moments-trig",
    "occupation",
    "sobolev",
    "holder-path",
    "holder-lt",
    "smallball-d1",
    "smallball-d4",
    "charfn-linear",
    "charfn-trig",
    "charfn-trig-joint",
    "density-linear",
    "density-trig",
);

pub fn preset_text(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

pub fn load_preset(name: &str) -> Result<LoadedConfig, ConfigError> {
    let text = preset_text(name).ok_or_else(|| {
        let names: Vec<&str> = PRESETS.iter().map(|(n, _)| *n).collect();
        ConfigError::new(format!(
            "unknown preset `{name}` (available: {})",
            names.join(", ")
        ))
    })?;
    LoadedConfig::parse(text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::validate;

    #[test]
    fn every_preset_validates() {
        for (name, _) in PRESETS {
            let loaded = load_preset(name).unwrap_or_else(|e| panic!("{name}: {e}"));
            validate(&loaded).unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }

    #[test]
    fn unknown_preset_lists_names() {
        let err = load_preset("nope").unwrap_err();
        assert!(err.message.contains("holder-path"));
    }
}
