//! Unit price book: civil works, socio-environmental items and percentage
//! overheads, with a parametric electromechanical cost curve.

use serde::{Deserialize, Serialize};

use super::EngineeringError;
use crate::Real;

pub mod item {
    pub const COMMON_EXCAVATION: &str = "Common excavation";
    pub const SURFACE_ROCK_EXCAVATION: &str = "Surface rock excavation";
    pub const UNDERGROUND_ROCK_EXCAVATION: &str = "Underground rock excavation";
    pub const BORROW_SOIL: &str = "Borrow soil";
    pub const QUARRY_ROCK: &str = "Quarry rock";
    pub const FOUNDATION_EARTHWORKS: &str = "Foundation cleaning and treatment - dam earthworks";
    pub const FOUNDATION_CONCRETE: &str = "Foundation cleaning and treatment - concrete structures";
    pub const COFFERDAM_REMOVAL: &str = "Cofferdam removal";
    pub const COFFERDAM_1: &str = "Cofferdam - 1st phase";
    pub const COFFERDAM_2: &str = "Cofferdam - 2nd phase";
    pub const COMPACTED_EARTH_FILL: &str = "Compacted earth fill";
    pub const CLAY_CORE: &str = "Clay core";
    pub const ROCKFILL: &str = "Rockfill";
    pub const FILTERS: &str = "Filters and transitions";
    pub const RIPRAP: &str = "Riprap or rockfill protection";
    pub const GRASS: &str = "Downstream face protection (grass)";
    pub const CEMENT: &str = "Cement";
    pub const STRUCTURAL_CONCRETE: &str = "Structural concrete";
    pub const MASS_CONCRETE: &str = "Roller-compacted or mass concrete";
    pub const SHOTCRETE: &str = "Shotcrete";
    pub const REINFORCEMENT: &str = "Reinforcement steel";
    pub const PENSTOCK_STEEL: &str = "Steel lining of penstocks";

    pub const ROAD_RELOCATION: &str = "Road relocation";
    pub const RAILWAY_RELOCATION: &str = "Railway relocation";
    pub const BRIDGE_RELOCATION: &str = "Bridge relocation";
    pub const RESETTLEMENT_RURAL: &str = "Resettlement in rural areas";
    pub const RESETTLEMENT_URBAN: &str = "Resettlement in urban areas";

    pub const OTHER_CIVIL: &str = "Other costs for civil accounts";
    pub const OTHER_SOCIAL: &str = "Other costs for social and environmental accounts";
    pub const MISC_CIVIL: &str = "Miscellaneous items for civil accounts";
    pub const MISC_EQUIPMENT: &str = "Miscellaneous items for equipment accounts";
    pub const MISC_SOCIAL: &str = "Miscellaneous items for social and environmental accounts";
    pub const MISC_INDIRECT: &str = "Miscellaneous items for indirect costs";
    pub const INDIRECT_SITE: &str = "Indirect costs for construction site and worker's camp";
    pub const INDIRECT_MAINTENANCE: &str = "Indirect costs for maintenance and operation of the site and the camp";
    pub const INDIRECT_ENGINEERING: &str = "Indirect costs for basic engineering";
    pub const INDIRECT_SPECIAL: &str = "Indirect costs for engineering special services";
    pub const INDIRECT_ENVIRONMENTAL: &str = "Indirect costs for environmental projects and studies";
    pub const INDIRECT_OWNER: &str = "Indirect costs for owner's administration";
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriceEntry {
    pub item: String,
    pub unit: String,
    /// USD per unit
    pub price: Real,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PercentEntry {
    pub item: String,
    pub percent: Real,
}

/// Account an overhead percentage is charged on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Account {
    Civil,
    Equipment,
    SocialEnvironmental,
    Indirect,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OverheadKind {
    Other,
    Miscellaneous,
    Indirect,
}

/// Classifies a percentage row by its item name.
pub fn overhead_role(name: &str) -> Option<(OverheadKind, Account)> {
    use item::*;
    use Account as A;
    use OverheadKind as K;
    let role = match name {
        OTHER_CIVIL => (K::Other, A::Civil),
        OTHER_SOCIAL => (K::Other, A::SocialEnvironmental),
        MISC_CIVIL => (K::Miscellaneous, A::Civil),
        MISC_EQUIPMENT => (K::Miscellaneous, A::Equipment),
        MISC_SOCIAL => (K::Miscellaneous, A::SocialEnvironmental),
        MISC_INDIRECT => (K::Miscellaneous, A::Indirect),
        INDIRECT_SITE | INDIRECT_MAINTENANCE | INDIRECT_ENGINEERING | INDIRECT_SPECIAL | INDIRECT_ENVIRONMENTAL | INDIRECT_OWNER => {
            (K::Indirect, A::Indirect)
        }
        _ => return None,
    };
    Some(role)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitPriceBook {
    pub civil: Vec<PriceEntry>,
    pub social: Vec<PriceEntry>,
    /// In table order; rows repeating an earlier item name are ignored by costing.
    pub percentages: Vec<PercentEntry>,
    /// Electromechanical cost coefficient, USD/kW at 1 m head.
    pub em_k: Real,
    /// Head exponent of the electromechanical cost curve.
    pub em_beta: Real,
}

fn entry(item: &str, unit: &str, price: Real) -> PriceEntry {
    PriceEntry { item: item.into(), unit: unit.into(), price }
}

fn pct(item: &str, percent: Real) -> PercentEntry {
    PercentEntry { item: item.into(), percent }
}

impl Default for UnitPriceBook {
    fn default() -> Self {
        use item::*;
        UnitPriceBook {
            civil: vec![
                entry(COMMON_EXCAVATION, "m3", 9.0),
                entry(SURFACE_ROCK_EXCAVATION, "m3", 24.0),
                entry(UNDERGROUND_ROCK_EXCAVATION, "m3", 139.0),
                entry(BORROW_SOIL, "m3", 12.0),
                entry(QUARRY_ROCK, "m3", 34.0),
                entry(FOUNDATION_EARTHWORKS, "m2", 8.0),
                entry(FOUNDATION_CONCRETE, "m2", 37.0),
                entry(COFFERDAM_REMOVAL, "m3", 10.0),
                entry(COFFERDAM_1, "m3", 9.0),
                entry(COFFERDAM_2, "m3", 9.0),
                entry(COMPACTED_EARTH_FILL, "m3", 8.0),
                entry(CLAY_CORE, "m3", 11.0),
                entry(ROCKFILL, "m3", 11.0),
                entry(FILTERS, "m3", 31.0),
                entry(RIPRAP, "m3", 24.0),
                entry(GRASS, "m2", 15.0),
                entry(CEMENT, "ton", 180.0),
                entry(STRUCTURAL_CONCRETE, "m3", 220.0),
                entry(MASS_CONCRETE, "m3", 120.0),
                entry(SHOTCRETE, "m3", 300.0),
                entry(REINFORCEMENT, "ton", 2800.0),
                entry(PENSTOCK_STEEL, "ton", 8000.0),
            ],
            social: vec![
                entry(ROAD_RELOCATION, "m", 750.0),
                entry(RAILWAY_RELOCATION, "m", 3000.0),
                entry(BRIDGE_RELOCATION, "m", 71500.0),
                entry(RESETTLEMENT_RURAL, "household", 15000.0),
                entry(RESETTLEMENT_URBAN, "household", 15000.0),
            ],
            percentages: vec![
                pct(OTHER_CIVIL, 2.0),
                pct(OTHER_SOCIAL, 30.0),
                pct(MISC_CIVIL, 20.0),
                pct(MISC_EQUIPMENT, 20.0),
                pct(MISC_SOCIAL, 20.0),
                pct(MISC_INDIRECT, 10.0),
                pct(INDIRECT_SITE, 2.0),
                pct(INDIRECT_MAINTENANCE, 2.0),
                pct(INDIRECT_ENGINEERING, 4.0),
                pct(INDIRECT_SPECIAL, 1.0),
                pct(INDIRECT_ENVIRONMENTAL, 1.5),
                pct(INDIRECT_OWNER, 1.5),
                pct(OTHER_CIVIL, 2.0),
            ],
            em_k: 1200.0,
            em_beta: 0.3,
        }
    }
}

impl UnitPriceBook {
    pub fn validate(&self) -> Result<(), EngineeringError> {
        for e in self.civil.iter().chain(&self.social) {
            if !(e.price >= 0.0 && e.price.is_finite()) {
                return Err(EngineeringError::InvalidPrice(format!("{}: {}", e.item, e.price)));
            }
        }
        for p in &self.percentages {
            if !(0.0..=100.0).contains(&p.percent) {
                return Err(EngineeringError::InvalidPrice(format!("{}: {}%", p.item, p.percent)));
            }
            if overhead_role(&p.item).is_none() {
                return Err(EngineeringError::InvalidPrice(format!("unknown percentage item {:?}", p.item)));
            }
        }
        if !(self.em_k >= 0.0 && self.em_beta.is_finite()) {
            return Err(EngineeringError::InvalidPrice("electromechanical coefficients".into()));
        }
        Ok(())
    }

    pub fn civil_price(&self, name: &str) -> Result<&PriceEntry, EngineeringError> {
        self.civil.iter().find(|e| e.item == name).ok_or_else(|| EngineeringError::MissingPrice(name.into()))
    }

    pub fn social_price(&self, name: &str) -> Result<&PriceEntry, EngineeringError> {
        self.social.iter().find(|e| e.item == name).ok_or_else(|| EngineeringError::MissingPrice(name.into()))
    }

    /// Percentage rules with duplicate item names removed, in table order.
    pub fn distinct_percentages(&self) -> Vec<&PercentEntry> {
        let mut seen = Vec::new();
        let mut out = Vec::new();
        for p in &self.percentages {
            if !seen.contains(&p.item.as_str()) {
                seen.push(p.item.as_str());
                out.push(p);
            }
        }
        out
    }

    /// Serializes in the sectioned tabular text format read by [`UnitPriceBook::parse`].
    pub fn to_text(&self) -> String {
        let mut w = String::from("[civil]\nitem,unit,price\n");
        let quote = |s: &str| if s.contains(',') || s.contains('"') { format!("\"{}\"", s.replace('"', "\"\"")) } else { s.to_string() };
        for e in &self.civil {
            w.push_str(&format!("{},{},{}\n", quote(&e.item), quote(&e.unit), e.price));
        }
        w.push_str("\n[social]\nitem,unit,price\n");
        for e in &self.social {
            w.push_str(&format!("{},{},{}\n", quote(&e.item), quote(&e.unit), e.price));
        }
        w.push_str("\n[percentages]\nitem,percent\n");
        for p in &self.percentages {
            w.push_str(&format!("{},{}\n", quote(&p.item), p.percent));
        }
        w.push_str(&format!("\n[electromechanical]\nparameter,value\nk_em_usd_per_kw,{}\nhead_exponent,{}\n", self.em_k, self.em_beta));
        w
    }

    /// Parses the sectioned tabular format: `[civil]`, `[social]`, `[percentages]`
    /// and `[electromechanical]` blocks, each a CSV table with a header row.
    pub fn parse(text: &str) -> Result<Self, EngineeringError> {
        let mut sections: Vec<(String, usize, String)> = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            if t.starts_with('[') && t.ends_with(']') {
                sections.push((t[1..t.len() - 1].trim().to_lowercase(), n + 1, String::new()));
            } else if let Some(last) = sections.last_mut() {
                last.2.push_str(t);
                last.2.push('\n');
            } else {
                return Err(EngineeringError::PriceFile { line: n + 1, message: "row outside a section".into() });
            }
        }
        let mut book = UnitPriceBook { civil: vec![], social: vec![], percentages: vec![], em_k: 1200.0, em_beta: 0.3 };
        for (name, line, body) in sections {
            let err = |m: String| EngineeringError::PriceFile { line, message: format!("[{name}] {m}") };
            let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(body.as_bytes());
            let rows: Vec<csv::StringRecord> = rdr.records().collect::<Result<_, _>>().map_err(|e| err(e.to_string()))?;
            let num = |s: &str| s.replace(',', "").parse::<Real>().map_err(|e| err(format!("{s:?}: {e}")));
            match name.as_str() {
                "civil" | "social" => {
                    let mut entries = Vec::new();
                    for r in &rows {
                        if r.len() != 3 {
                            return Err(err("expected item,unit,price".into()));
                        }
                        entries.push(entry(&r[0], &r[1], num(&r[2])?));
                    }
                    if name == "civil" {
                        book.civil = entries;
                    } else {
                        book.social = entries;
                    }
                }
                "percentages" => {
                    for r in &rows {
                        if r.len() != 2 {
                            return Err(err("expected item,percent".into()));
                        }
                        book.percentages.push(pct(&r[0], num(&r[1])?));
                    }
                }
                "electromechanical" => {
                    for r in &rows {
                        match (&r[0], r.get(1)) {
                            ("k_em_usd_per_kw", Some(v)) => book.em_k = num(v)?,
                            ("head_exponent", Some(v)) => book.em_beta = num(v)?,
                            (k, _) => return Err(err(format!("unknown parameter {k:?}"))),
                        }
                    }
                }
                other => return Err(err(format!("unknown section {other:?}"))),
            }
        }
        book.validate()?;
        Ok(book)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_book_mirrors_tables() {
        let book = UnitPriceBook::default();
        book.validate().unwrap();
        assert_eq!(book.civil.len(), 22);
        assert_eq!(book.civil_price(item::MASS_CONCRETE).unwrap().price, 120.0);
        assert_eq!(book.social_price(item::RESETTLEMENT_RURAL).unwrap().price, 15000.0);
        assert_eq!(book.percentages.len(), 13);
        assert_eq!(book.distinct_percentages().len(), 12);
    }

    #[test]
    fn text_round_trip() {
        let book = UnitPriceBook::default();
        assert_eq!(UnitPriceBook::parse(&book.to_text()).unwrap(), book);
    }

    #[test]
    fn thousands_separators_and_errors() {
        let text = "[civil]\nitem,unit,price\nReinforcement steel,ton,\"2,800\"\n";
        let book = UnitPriceBook::parse(text).unwrap();
        assert_eq!(book.civil[0].price, 2800.0);
        assert!(matches!(book.civil_price("Cement"), Err(EngineeringError::MissingPrice(_))));
        let text = "[percentages]\nitem,percent\nOther costs for civil accounts,120\n";
        assert!(matches!(UnitPriceBook::parse(text), Err(EngineeringError::InvalidPrice(_))));
        let text = "[bogus]\na,b\n";
        assert!(matches!(UnitPriceBook::parse(text), Err(EngineeringError::PriceFile { .. })));
    }
}
