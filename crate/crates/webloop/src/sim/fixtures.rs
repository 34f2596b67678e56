//! Built-in fixture sites, one per benchmark domain, plus the two-task
//! transfer fixture used by the multi-task ablation.

use super::{site_from_json, SimSite, SimError};

const SHOPPING: &str = include_str!("fixtures/shopping.json");
const SHOPPING_ADMIN: &str = include_str!("fixtures/shopping_admin.json");
const GITLAB: &str = include_str!("fixtures/gitlab.json");
const MAP: &str = include_str!("fixtures/map.json");
const REDDIT: &str = include_str!("fixtures/reddit.json");
const MULTISITE: &str = include_str!("fixtures/multisite.json");
const TRANSFER: &str = include_str!("fixtures/transfer.json");

pub const BUILTIN_NAMES: [&str; 7] = [
    "shopping",
    "shopping_admin",
    "gitlab",
    "map",
    "reddit",
    "multisite",
    "transfer",
];

/// Loads one built-in site by name.
pub fn builtin_site(name: &str) -> Result<SimSite, SimError> {
    let text = match name {
        "shopping" => SHOPPING,
        "shopping_admin" => SHOPPING_ADMIN,
        "gitlab" => GITLAB,
        "map" => MAP,
        "reddit" => REDDIT,
        "multisite" => MULTISITE,
        "transfer" => TRANSFER,
        other => return Err(SimError::Fixture(format!("no built-in site named `{other}`"))),
    };
    site_from_json(text)
}

/// The six-domain suite the loop harness runs by default. The transfer
/// fixture is not part of it; it exists for the ablation comparisons.
pub fn builtin_suite() -> Vec<SimSite> {
    ["shopping", "shopping_admin", "gitlab", "map", "reddit", "multisite"]
        .iter()
        .map(|name| builtin_site(name).expect("built-in fixtures validate"))
        .collect()
}
