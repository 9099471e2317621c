//! Scenarios bundled with the binary.

use crate::error::RunResult;
use crate::scenario::Scenario;

macro_rules! bundle {
    ($($name:literal),* $(,)?) => {
        pub const SHIPPED: &[(&str, &str)] = &[
            $(($name, include_str!(concat!("../scenarios/", $name, ".toml")))),*
        ];
    };
}

bundle!(
    "barenblatt-slow-n3",
    "barenblatt-slow-n1",
    "barenblatt-p3q1-n2",
    "gaussian-heat-n2",
    "hyperbolic-bump-slow-n2",
    "hyperbolic-bump-slow-n3",
    "fast-bump-n3",
    "fast-bump-n2",
    "fast-bump-hyperbolic-n2",
);

pub fn names() -> impl Iterator<Item = &'static str> {
    SHIPPED.iter().map(|(n, _)| *n)
}

/// Parses a bundled scenario by name.
pub fn shipped(name: &str) -> Option<RunResult<Scenario>> {
    SHIPPED
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| Scenario::from_toml(text))
}
