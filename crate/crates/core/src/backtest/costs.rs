//! Two-way transaction costs per asset class, in percent of traded notional.

use serde::{Deserialize, Serialize};

use crate::market_data::AssetClass;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassCost {
    pub brokerage_pct: f64,
    pub spread_pct: f64,
    pub impact_pct: f64,
}

impl ClassCost {
    pub const ZERO: ClassCost = ClassCost {
        brokerage_pct: 0.0,
        spread_pct: 0.0,
        impact_pct: 0.0,
    };

    /// Buy plus sell cost of a full round trip, percent.
    pub fn total_pct(&self) -> f64 {
        self.brokerage_pct + self.spread_pct + self.impact_pct
    }

    /// Cost of trading `delta` weight on one side, as a return fraction.
    pub fn per_side_fraction(&self, delta: f64) -> f64 {
        delta * (self.total_pct() / 2.0) / 100.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostSchedule {
    pub equities: ClassCost,
    pub currencies: ClassCost,
    pub commodities: ClassCost,
    pub fixed_income: ClassCost,
}

impl Default for CostSchedule {
    fn default() -> Self {
        Self {
            equities: ClassCost {
                brokerage_pct: 0.14,
                spread_pct: 0.13,
                impact_pct: 0.53,
            },
            currencies: ClassCost {
                brokerage_pct: 0.0,
                spread_pct: 0.13,
                impact_pct: 0.0,
            },
            commodities: ClassCost {
                brokerage_pct: 0.14,
                spread_pct: 0.13,
                impact_pct: 0.0,
            },
            fixed_income: ClassCost {
                brokerage_pct: 0.14,
                spread_pct: 0.13,
                impact_pct: 0.53,
            },
        }
    }
}

impl CostSchedule {
    /// Cash is never charged.
    pub fn for_class(&self, class: AssetClass) -> ClassCost {
        match class {
            AssetClass::Equities => self.equities,
            AssetClass::Currencies => self.currencies,
            AssetClass::Commodities => self.commodities,
            AssetClass::FixedIncome => self.fixed_income,
            AssetClass::Cash => ClassCost::ZERO,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_totals() {
        let c = CostSchedule::default();
        let close = |a: f64, b: f64| (a - b).abs() < 1e-12;
        assert!(close(c.for_class(AssetClass::Equities).total_pct(), 0.8));
        assert!(close(c.for_class(AssetClass::Currencies).total_pct(), 0.13));
        assert!(close(c.for_class(AssetClass::Commodities).total_pct(), 0.27));
        assert!(close(c.for_class(AssetClass::FixedIncome).total_pct(), 0.8));
        assert_eq!(c.for_class(AssetClass::Cash).total_pct(), 0.0);
    }
}
