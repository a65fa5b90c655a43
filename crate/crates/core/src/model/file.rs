//! TOML scenario files.
//!
//! ```toml
//! horizon = 3
//! users = 2
//! wrap_allowed = false
//! billing = "daily"            # or "hourly"
//!
//! [pricing]
//! kind = "quadratic"           # or "polynomial" (ascending powers from x^0)
//! coefficients = ["1"]
//!
//! [[loads]]
//! id = "u1_shift"
//! owner = 1                    # or "background"
//! rate_kwh = "2"               # decimal, "p/q" string, or TOML number
//! duration = 1
//! kind = "shiftable"           # or "fixed"
//! window_start = 1
//! window_end = 3
//! ```
//!
//! Rates and coefficients are written back as strings so that values like
//! `2/3` survive a round trip exactly.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Billing, Load, LoadKind, Owner, PricingFunction, PricingKind, Scenario, TimeSlot};
use crate::error::{Error, Result};
use crate::numeric::{format_rational, parse_rational, Q};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    horizon: u32,
    users: u32,
    #[serde(default)]
    wrap_allowed: bool,
    #[serde(default = "default_billing")]
    billing: Billing,
    pricing: PricingFile,
    #[serde(default)]
    loads: Vec<LoadFile>,
}

fn default_billing() -> Billing {
    Billing::DailyProportional
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PricingFile {
    kind: PricingKind,
    coefficients: Vec<RationalText>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LoadFile {
    id: String,
    owner: OwnerText,
    rate_kwh: RationalText,
    duration: u32,
    kind: LoadKind,
    window_start: u32,
    window_end: u32,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum OwnerText {
    User(u32),
    Tag(String),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum RationalText {
    Int(i64),
    Float(f64),
    Text(String),
}

impl RationalText {
    fn value(&self) -> Result<Q> {
        match self {
            RationalText::Int(i) => Ok(Q::from_integer(*i as i128)),
            // shortest round-trip text of the float, read back as an exact decimal
            RationalText::Float(f) => parse_rational(&format!("{f}")),
            RationalText::Text(t) => parse_rational(t),
        }
    }
}

impl ScenarioFile {
    fn into_scenario(self) -> Result<Scenario> {
        let coefficients = self
            .pricing
            .coefficients
            .iter()
            .map(RationalText::value)
            .collect::<Result<Vec<_>>>()?;
        let loads = self
            .loads
            .into_iter()
            .map(|l| {
                let owner = match l.owner {
                    OwnerText::User(k) => Owner::User(k),
                    OwnerText::Tag(t) if t.eq_ignore_ascii_case("background") => Owner::Background,
                    OwnerText::Tag(t) => {
                        return Err(Error::ScenarioFile(format!(
                            "load `{}`: owner must be an integer or \"background\", got {t:?}",
                            l.id
                        )))
                    }
                };
                Ok(Load {
                    rate: l.rate_kwh.value()?,
                    id: l.id,
                    owner,
                    duration: l.duration,
                    window: (TimeSlot(l.window_start), TimeSlot(l.window_end)),
                    kind: l.kind,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Scenario {
            horizon: self.horizon,
            users: self.users,
            loads,
            pricing: PricingFunction { kind: self.pricing.kind, coefficients },
            billing: self.billing,
            wrap_allowed: self.wrap_allowed,
        })
    }

    fn from_scenario(s: &Scenario) -> Self {
        ScenarioFile {
            horizon: s.horizon,
            users: s.users,
            wrap_allowed: s.wrap_allowed,
            billing: s.billing,
            pricing: PricingFile {
                kind: s.pricing.kind,
                coefficients: s
                    .pricing
                    .coefficients
                    .iter()
                    .map(|c| RationalText::Text(format_rational(c)))
                    .collect(),
            },
            loads: s
                .loads
                .iter()
                .map(|l| LoadFile {
                    id: l.id.clone(),
                    owner: match l.owner {
                        Owner::User(k) => OwnerText::User(k),
                        Owner::Background => OwnerText::Tag("background".into()),
                    },
                    rate_kwh: RationalText::Text(format_rational(&l.rate)),
                    duration: l.duration,
                    kind: l.kind,
                    window_start: l.window.0 .0,
                    window_end: l.window.1 .0,
                })
                .collect(),
        }
    }
}

pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| Error::ScenarioFile(e.to_string()))?;
    file.into_scenario()
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse_scenario(&text).map_err(|e| match e {
        Error::ScenarioFile(msg) => Error::ScenarioFile(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn scenario_to_toml(s: &Scenario) -> String {
    toml::to_string(&ScenarioFile::from_scenario(s)).expect("scenario serializes to TOML")
}

pub fn write_scenario(s: &Scenario, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, scenario_to_toml(s))?;
    Ok(())
}
