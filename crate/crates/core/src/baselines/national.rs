use alloc::collections::BTreeMap;
use alloc::format;

use serde::{Deserialize, Serialize};

use crate::dataset::{ApplianceKind, HomeRecord};
use crate::neighbors::{ApplianceEstimate, Method, Provenance};
use crate::{Error, Result};

/// Fraction of the monthly aggregate attributed to each appliance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FractionTable {
    fractions: BTreeMap<ApplianceKind, f64>,
}

impl FractionTable {
    pub fn new(fractions: BTreeMap<ApplianceKind, f64>) -> Result<Self> {
        let mut total = 0.0;
        for (kind, f) in &fractions {
            if !(0.0..=1.0).contains(f) {
                return Err(Error::InvalidFraction(format!("{kind}: {f} is outside [0, 1]")));
            }
            if kind.is_evaluated() {
                total += f;
            }
        }
        if total > 1.0 + 1e-12 {
            return Err(Error::InvalidFraction(format!("fractions sum to {total}, more than 1")));
        }
        Ok(FractionTable { fractions })
    }

    /// US residential end-use shares: HVAC 13 %, lighting 11 %,
    /// refrigeration 7 %, dryer 4 %, dish washer 2 %, washing machine 1 %.
    pub fn national() -> Self {
        use ApplianceKind::*;
        FractionTable {
            fractions: BTreeMap::from([
                (Hvac, 0.13),
                (Lights, 0.11),
                (Fridge, 0.07),
                (Dryer, 0.04),
                (DishWasher, 0.02),
                (WashingMachine, 0.01),
            ]),
        }
    }

    /// National shares with the Texas HVAC share of 18 %.
    pub fn texas() -> Self {
        let mut table = Self::national();
        table.fractions.insert(ApplianceKind::Hvac, 0.18);
        table
    }

    pub fn get(&self, kind: &ApplianceKind) -> Option<f64> {
        self.fractions.get(kind).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ApplianceKind, f64)> {
        self.fractions.iter().map(|(k, v)| (k, *v))
    }
}

impl Default for FractionTable {
    fn default() -> Self {
        Self::texas()
    }
}

/// Each month's prediction is `fraction * aggregate`.
pub fn national_average(
    home: &HomeRecord,
    table: &FractionTable,
    appliance: &ApplianceKind,
) -> Result<ApplianceEstimate> {
    let fraction = table
        .get(appliance)
        .ok_or_else(|| Error::MissingFraction(appliance.clone()))?;
    Ok(ApplianceEstimate {
        home_id: home.home_id.clone(),
        appliance: appliance.clone(),
        monthly: home.aggregate.scaled(fraction),
        method: Method::NationalAverage,
        provenance: Provenance::NationalAverage { fraction },
    })
}
