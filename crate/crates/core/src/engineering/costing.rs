//! Structure quantities and the unit-price budget.

use serde::{Deserialize, Serialize};

use super::prices::{item, overhead_role, Account, OverheadKind, UnitPriceBook};
use super::{DesignConfig, EngineeringError, Scheme, SiteGeometry, Template};
use crate::Real;

/// Steel density, t/m³.
const STEEL_DENSITY: Real = 7.85;
/// Reinforcement per m³ of structural concrete, t.
const REBAR_RATIO: Real = 0.08;
/// Spillway surcharge over the crest, m.
const SPILLWAY_SURCHARGE: Real = 3.0;
/// Penstock and tunnel design velocities, m/s.
const PENSTOCK_VELOCITY: Real = 5.0;
const TUNNEL_VELOCITY: Real = 3.0;

/// Everything the budget depends on, before capacity is final.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariantSkeleton {
    pub scheme: Scheme,
    pub template: Template,
    pub gross_head: Real,
    /// Pool depth at the dam, m.
    pub dam_depth: Real,
    /// kW
    pub installed_capacity: Real,
    /// m³/s
    pub max_turbine_flow: Real,
    pub households: Real,
    pub road_m: Real,
    pub railway_m: Real,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostLine {
    pub account: Account,
    pub item: String,
    pub quantity: Real,
    pub unit: String,
    pub unit_price: Real,
    pub cost: Real,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverheadLine {
    pub item: String,
    pub kind: OverheadKind,
    pub account: Account,
    pub base: Real,
    pub percent: Real,
    pub cost: Real,
}

/// Itemized budget. `total` is the capex.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub lines: Vec<CostLine>,
    pub overheads: Vec<OverheadLine>,
    pub total: Real,
}

impl CostBreakdown {
    pub fn direct(&self, account: Account) -> Real {
        self.lines.iter().filter(|l| l.account == account).map(|l| l.cost).sum()
    }

    /// Sum of every direct and overhead line.
    pub fn itemized_sum(&self) -> Real {
        self.lines.iter().map(|l| l.cost).sum::<Real>() + self.overheads.iter().map(|o| o.cost).sum::<Real>()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructureDesign {
    /// Dam height including freeboard, m.
    pub dam_height: Real,
    pub crest_length: Real,
    pub dam_volume: Real,
    pub breakdown: CostBreakdown,
}

impl StructureDesign {
    pub fn capex(&self) -> Real {
        self.breakdown.total
    }
}

struct Bill<'a> {
    prices: &'a UnitPriceBook,
    lines: Vec<CostLine>,
}

impl Bill<'_> {
    fn civil(&mut self, name: &str, quantity: Real) -> Result<(), EngineeringError> {
        let p = self.prices.civil_price(name)?;
        self.push(Account::Civil, name, quantity, p.unit.clone(), p.price);
        Ok(())
    }

    fn social(&mut self, name: &str, quantity: Real) -> Result<(), EngineeringError> {
        let p = self.prices.social_price(name)?;
        self.push(Account::SocialEnvironmental, name, quantity, p.unit.clone(), p.price);
        Ok(())
    }

    fn push(&mut self, account: Account, name: &str, quantity: Real, unit: String, unit_price: Real) {
        if quantity > 0.0 {
            self.lines.push(CostLine { account, item: name.into(), quantity, unit, unit_price, cost: quantity * unit_price });
        }
    }
}

/// Dam cross-section area (m²) for a structure of height `h`.
pub(crate) fn section_area(template: Template, h: Real) -> Real {
    match template {
        // triangular gravity section, base 1.6 h
        Template::ConcreteGravity => 0.8 * h * h,
        // 6 m crest, 2.5H:1V faces
        Template::Earthfill => 6.0 * h + 2.5 * h * h,
    }
}

fn base_width(template: Template, h: Real) -> Real {
    match template {
        Template::ConcreteGravity => 1.6 * h,
        Template::Earthfill => 6.0 + 5.0 * h,
    }
}

/// Designs the structures of a variant and prices them.
///
/// Direct costs come from the civil, equipment and socio-environmental
/// accounts. Percentage overheads are then applied in four passes: "other"
/// items on their account, "miscellaneous" items on the account plus its
/// "other" costs, indirect items on the whole direct total, and finally the
/// miscellaneous share of the indirect costs.
pub fn design_structures(
    skeleton: &VariantSkeleton,
    site: &SiteGeometry,
    prices: &UnitPriceBook,
    cfg: &DesignConfig,
) -> Result<StructureDesign, EngineeringError> {
    cfg.check_scheme(skeleton.scheme, skeleton.gross_head)?;
    if skeleton.dam_depth > skeleton.gross_head || skeleton.dam_depth < 0.0 {
        return Err(EngineeringError::IncompatibleDesign(format!(
            "pool depth {} outside [0, head {}]",
            skeleton.dam_depth, skeleton.gross_head
        )));
    }
    let mut bill = Bill { prices, lines: Vec::new() };

    let h = if skeleton.dam_depth > 0.0 { skeleton.dam_depth + cfg.freeboard_m } else { 0.0 };
    let crest = site.river_width + 2.0 * site.valley_side_slope * h;
    let dam_volume = section_area(skeleton.template, h) * crest;
    let footprint = base_width(skeleton.template, h) * crest;
    match skeleton.template {
        Template::ConcreteGravity => {
            bill.civil(item::MASS_CONCRETE, dam_volume)?;
            bill.civil(item::FOUNDATION_CONCRETE, footprint)?;
            bill.civil(item::COMMON_EXCAVATION, footprint)?;
            bill.civil(item::SURFACE_ROCK_EXCAVATION, footprint)?;
        }
        Template::Earthfill => {
            let face = (1.0 + 2.5 * 2.5_f64).sqrt() * h * crest;
            bill.civil(item::COMPACTED_EARTH_FILL, 0.70 * dam_volume)?;
            bill.civil(item::CLAY_CORE, 0.15 * dam_volume)?;
            bill.civil(item::ROCKFILL, 0.10 * dam_volume)?;
            bill.civil(item::FILTERS, 0.05 * dam_volume)?;
            bill.civil(item::RIPRAP, face)?;
            bill.civil(item::GRASS, face)?;
            bill.civil(item::FOUNDATION_EARTHWORKS, footprint)?;
            bill.civil(item::COMMON_EXCAVATION, footprint)?;
        }
    }

    // spillway: ogee crest sized for the design flood
    let flood = cfg.flood_factor * site.mean_flow;
    let spill_width = flood / (2.0 * SPILLWAY_SURCHARGE.powf(1.5));
    let spill_concrete = if h > 0.0 { spill_width * (2.0 * h + 20.0) } else { 0.0 };

    // river diversion during construction
    let cofferdam = 60.0 * site.river_width;
    bill.civil(item::COFFERDAM_1, cofferdam)?;
    bill.civil(item::COFFERDAM_2, cofferdam)?;
    bill.civil(item::COFFERDAM_REMOVAL, 2.0 * cofferdam)?;

    let mw = skeleton.installed_capacity / 1000.0;
    let q = skeleton.max_turbine_flow;
    let powerhouse_concrete = 250.0 * mw.max(0.0).powf(0.7) + 15.0 * q;
    bill.civil(item::SURFACE_ROCK_EXCAVATION, 2.0 * powerhouse_concrete)?;

    let penstock_length = match skeleton.scheme {
        Scheme::DamToe => 1.5 * h + 20.0,
        Scheme::Diversion => 3.0 * skeleton.gross_head + 50.0,
    };
    let diameter = (4.0 * q / (std::f64::consts::PI * PENSTOCK_VELOCITY)).sqrt();
    let wall = 0.012 + 0.0002 * skeleton.gross_head;
    let penstock_t = STEEL_DENSITY * std::f64::consts::PI * diameter * penstock_length * wall;
    bill.civil(item::PENSTOCK_STEEL, penstock_t)?;

    if skeleton.scheme == Scheme::Diversion {
        // waterway follows the river until the remaining head is gained
        let length = (skeleton.gross_head - skeleton.dam_depth).max(0.0) / site.upstream_slope;
        let area = 1.15 * q / TUNNEL_VELOCITY;
        bill.civil(item::UNDERGROUND_ROCK_EXCAVATION, area * length)?;
        bill.civil(item::SHOTCRETE, 0.1 * 3.6 * area.sqrt() * length)?;
    }

    let structural = spill_concrete + powerhouse_concrete;
    bill.civil(item::STRUCTURAL_CONCRETE, structural)?;
    bill.civil(item::REINFORCEMENT, REBAR_RATIO * structural)?;

    if skeleton.installed_capacity > 0.0 {
        let unit = prices.em_k / skeleton.gross_head.powf(prices.em_beta);
        bill.push(Account::Equipment, "Electromechanical equipment", skeleton.installed_capacity, "kW".into(), unit);
    }

    bill.social(item::RESETTLEMENT_RURAL, skeleton.households)?;
    bill.social(item::ROAD_RELOCATION, skeleton.road_m)?;
    bill.social(item::RAILWAY_RELOCATION, skeleton.railway_m)?;

    let breakdown = apply_overheads(bill.lines, prices)?;
    Ok(StructureDesign { dam_height: h, crest_length: crest, dam_volume, breakdown })
}

fn apply_overheads(lines: Vec<CostLine>, prices: &UnitPriceBook) -> Result<CostBreakdown, EngineeringError> {
    let mut out = CostBreakdown { lines, overheads: Vec::new(), total: 0.0 };
    let direct = |a| out.direct(a);
    let mut account_base = [
        (Account::Civil, direct(Account::Civil)),
        (Account::Equipment, direct(Account::Equipment)),
        (Account::SocialEnvironmental, direct(Account::SocialEnvironmental)),
    ];
    let rules: Vec<_> = prices
        .distinct_percentages()
        .into_iter()
        .map(|p| {
            overhead_role(&p.item)
                .map(|(kind, account)| (p, kind, account))
                .ok_or_else(|| EngineeringError::InvalidPrice(format!("unknown percentage item {:?}", p.item)))
        })
        .collect::<Result<_, _>>()?;

    let mut overheads = Vec::new();
    let mut charge = |p: &super::prices::PercentEntry, kind, account, base: Real| {
        let cost = base * p.percent / 100.0;
        overheads.push(OverheadLine { item: p.item.clone(), kind, account, base, percent: p.percent, cost });
        cost
    };

    // "other" then "miscellaneous" on each direct account
    for pass in [OverheadKind::Other, OverheadKind::Miscellaneous] {
        let mut added = [0.0; 3];
        for &(p, kind, account) in &rules {
            if kind != pass || account == Account::Indirect {
                continue;
            }
            let slot = account_base.iter().position(|(a, _)| *a == account).expect("direct account");
            added[slot] += charge(p, kind, account, account_base[slot].1);
        }
        for (slot, extra) in added.iter().enumerate() {
            account_base[slot].1 += extra;
        }
    }
    let direct_total: Real = account_base.iter().map(|(_, v)| v).sum();

    let mut indirect = 0.0;
    for &(p, kind, account) in &rules {
        if kind == OverheadKind::Indirect {
            indirect += charge(p, kind, account, direct_total);
        }
    }
    let mut misc_indirect = 0.0;
    for &(p, kind, account) in &rules {
        if kind == OverheadKind::Miscellaneous && account == Account::Indirect {
            misc_indirect += charge(p, kind, account, indirect);
        }
    }

    out.overheads = overheads;
    out.total = direct_total + indirect + misc_indirect;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn site() -> SiteGeometry {
        SiteGeometry {
            segment_id: "S1".into(),
            river_width: 40.0,
            valley_side_slope: 4.0,
            upstream_slope: 0.002,
            available_heads: vec![10.0, 20.0, 30.0],
            foot_elevation: 100.0,
            drainage_area: 5000.0,
            mean_flow: 100.0,
            ecological_flow: 5.0,
        }
    }

    fn skeleton(template: Template, head: Real, q: Real) -> VariantSkeleton {
        let e = 9.81 * 0.9 * head * q;
        VariantSkeleton {
            scheme: Scheme::DamToe,
            template,
            gross_head: head,
            dam_depth: head,
            installed_capacity: e,
            max_turbine_flow: q,
            households: 0.0,
            road_m: 0.0,
            railway_m: 0.0,
        }
    }

    #[test]
    fn unit_prices_from_tables() {
        let book = UnitPriceBook::default();
        let mut bill = Bill { prices: &book, lines: vec![] };
        bill.civil(item::MASS_CONCRETE, 1.0).unwrap();
        bill.social(item::RESETTLEMENT_RURAL, 10.0).unwrap();
        assert_eq!(bill.lines[0].cost, 120.0);
        assert_eq!(bill.lines[1].cost, 150_000.0);
    }

    #[test]
    fn social_overheads_by_hand() {
        // 10 households only: 150,000 direct, +30% other, +20% misc on 195,000,
        // indirect 12% of 234,000, +10% misc of indirect.
        let book = UnitPriceBook::default();
        let lines = vec![CostLine {
            account: Account::SocialEnvironmental,
            item: item::RESETTLEMENT_RURAL.into(),
            quantity: 10.0,
            unit: "household".into(),
            unit_price: 15000.0,
            cost: 150_000.0,
        }];
        let b = apply_overheads(lines, &book).unwrap();
        let direct = 150_000.0 * 1.3 * 1.2;
        let indirect = direct * 0.12;
        let expected = direct + indirect * 1.1;
        assert!((b.total - expected).abs() < 1e-6);
        assert!((b.itemized_sum() - b.total).abs() < 1e-6);
        // duplicate "Other costs for civil accounts" row applies once
        assert_eq!(b.overheads.iter().filter(|o| o.item == item::OTHER_CIVIL).count(), 1);
    }

    #[test]
    fn degenerate_design_costs_nothing() {
        let s = SiteGeometry { river_width: 0.0, valley_side_slope: 0.0, mean_flow: 0.0, ..site() };
        let sk = VariantSkeleton {
            dam_depth: 0.0,
            installed_capacity: 0.0,
            max_turbine_flow: 0.0,
            ..skeleton(Template::ConcreteGravity, 10.0, 0.0)
        };
        let d = design_structures(&sk, &s, &UnitPriceBook::default(), &DesignConfig::default()).unwrap();
        assert_eq!(d.capex(), 0.0);
        assert!(d.breakdown.lines.is_empty());
        assert!(d.breakdown.overheads.iter().all(|o| o.cost == 0.0));
    }

    #[test]
    fn incompatible_and_missing_prices() {
        let cfg = DesignConfig::default();
        let mut sk = skeleton(Template::Earthfill, 10.0, 50.0);
        sk.scheme = Scheme::Diversion;
        assert!(matches!(design_structures(&sk, &site(), &UnitPriceBook::default(), &cfg), Err(EngineeringError::IncompatibleDesign(_))));
        let mut book = UnitPriceBook::default();
        book.civil.retain(|e| e.item != item::CLAY_CORE);
        assert_eq!(
            design_structures(&skeleton(Template::Earthfill, 10.0, 50.0), &site(), &book, &cfg),
            Err(EngineeringError::MissingPrice(item::CLAY_CORE.into()))
        );
    }

    #[test]
    fn diversion_adds_waterway() {
        let cfg = DesignConfig::default();
        let mut sk = skeleton(Template::ConcreteGravity, 30.0, 50.0);
        sk.scheme = Scheme::Diversion;
        sk.dam_depth = cfg.dam_depth(Scheme::Diversion, 30.0);
        let d = design_structures(&sk, &site(), &UnitPriceBook::default(), &cfg).unwrap();
        assert!(d.breakdown.lines.iter().any(|l| l.item == item::UNDERGROUND_ROCK_EXCAVATION));
        assert!((d.dam_height - 9.5).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn breakdown_sums_to_capex(head in 5.0..60.0_f64, q in 0.0..500.0_f64, hh in 0.0..500.0_f64, earth in any::<bool>()) {
            let t = if earth { Template::Earthfill } else { Template::ConcreteGravity };
            let mut sk = skeleton(t, head, q);
            sk.households = hh;
            sk.road_m = hh * 10.0;
            let d = design_structures(&sk, &site(), &UnitPriceBook::default(), &DesignConfig::default()).unwrap();
            let sum = d.breakdown.itemized_sum();
            prop_assert!((sum - d.capex()).abs() <= 1e-6 * d.capex().max(1.0));
        }

        #[test]
        fn capex_non_decreasing_in_head(head in 5.0..55.0_f64, dh in 0.0..5.0_f64, q in 1.0..300.0_f64, earth in any::<bool>()) {
            let t = if earth { Template::Earthfill } else { Template::ConcreteGravity };
            let cfg = DesignConfig::default();
            let book = UnitPriceBook::default();
            let a = design_structures(&skeleton(t, head, q), &site(), &book, &cfg).unwrap();
            let b = design_structures(&skeleton(t, head + dh, q), &site(), &book, &cfg).unwrap();
            prop_assert!(b.dam_volume >= a.dam_volume);
            prop_assert!(b.capex() >= a.capex() - 1e-6);
        }
    }
}
