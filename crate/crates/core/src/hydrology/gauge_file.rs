use chrono::NaiveDate;

use super::{DailySeries, HydrologyError};
use crate::Real;

/// Reads a gauge file:
///
/// ```text
/// gauge_id,drainage_area_km2
/// BOOUE,49000
/// date,flow_m3s
/// 1965-01-01,1234.5
/// ```
pub fn parse_gauge_csv(text: &str) -> Result<DailySeries, HydrologyError> {
    let mut reader =
        csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).comment(Some(b'#')).from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (n, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| HydrologyError::Parse { line: n + 1, message: e.to_string() })?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(n + 1);
        rows.push((line, rec));
    }
    let expect = |idx: usize, want: [&str; 2]| -> Result<(), HydrologyError> {
        let (line, rec) = rows.get(idx).ok_or(HydrologyError::Parse { line: idx + 1, message: "truncated header".into() })?;
        if rec.len() != 2 || rec[0] != *want[0] || rec[1] != *want[1] {
            return Err(HydrologyError::Parse { line: *line, message: format!("expected header {},{}", want[0], want[1]) });
        }
        Ok(())
    };
    expect(0, ["gauge_id", "drainage_area_km2"])?;
    let (line, meta) = rows.get(1).ok_or(HydrologyError::Parse { line: 2, message: "missing gauge metadata".into() })?;
    let gauge_id = meta.get(0).unwrap_or_default().to_string();
    let area: Real = meta
        .get(1)
        .unwrap_or_default()
        .parse()
        .map_err(|e| HydrologyError::Parse { line: *line, message: format!("drainage_area_km2: {e}") })?;
    expect(2, ["date", "flow_m3s"])?;

    let mut samples = Vec::with_capacity(rows.len().saturating_sub(3));
    for (line, rec) in &rows[3..] {
        let bad = |m: String| HydrologyError::Parse { line: *line, message: m };
        if rec.len() != 2 {
            return Err(bad(format!("expected 2 columns, got {}", rec.len())));
        }
        let date = NaiveDate::parse_from_str(&rec[0], "%Y-%m-%d").map_err(|e| bad(format!("date: {e}")))?;
        let flow: Real = rec[1].parse().map_err(|e| bad(format!("flow_m3s: {e}")))?;
        samples.push((date, flow));
    }
    DailySeries::new(gauge_id, area, samples)
}

pub fn write_gauge_csv(series: &DailySeries) -> String {
    let mut out = format!("gauge_id,drainage_area_km2\n{},{}\ndate,flow_m3s\n", series.gauge_id, series.drainage_area);
    for (d, q) in &series.samples {
        out.push_str(&format!("{},{:.4}\n", d.format("%Y-%m-%d"), q));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_round_trips() {
        let text = "gauge_id,drainage_area_km2\nG1,1000\ndate,flow_m3s\n2000-01-01,12.5\n2000-01-02,13\n";
        let s = parse_gauge_csv(text).unwrap();
        assert_eq!(s.gauge_id, "G1");
        assert_eq!(s.drainage_area, 1000.0);
        assert_eq!(s.samples.len(), 2);
        assert_eq!(parse_gauge_csv(&write_gauge_csv(&s)).unwrap(), s);
    }

    #[test]
    fn reports_bad_rows() {
        let text = "gauge_id,drainage_area_km2\nG1,1000\ndate,flow_m3s\n2000-01-01,x\n";
        assert!(matches!(parse_gauge_csv(text), Err(HydrologyError::Parse { line: 4, .. })));
        let text = "gauge_id,area\nG1,1000\n";
        assert!(matches!(parse_gauge_csv(text), Err(HydrologyError::Parse { line: 1, .. })));
        let text = "gauge_id,drainage_area_km2\nG1,1000\ndate,flow_m3s\n2000-01-02,1\n2000-01-01,1\n";
        assert!(matches!(parse_gauge_csv(text), Err(HydrologyError::InvalidSeries { .. })));
    }
}
