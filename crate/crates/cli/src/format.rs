//! Instance and solution files.
//!
//! Text instances:
//!
//! ```text
//! GPM 1 <p> <q> <r> <n>
//! A <x> <y> [supply]      (r lines)
//! B <x> <y> [demand]      (n lines)
//! ```
//!
//! Solutions are `PAIR <a_id> <b_id> <flow>` lines followed by
//! `COST <value>`. Both also have a JSON form. Blank lines and lines
//! starting with `#` are skipped. Reals are written with 17 significant
//! digits.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use gpm_core::transport::TransportPlan;
use gpm_core::{CostParams, GpmError, Matching, Point, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Text,
    Structured,
}

impl FromStr for Format {
    type Err = GpmError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" => Ok(Format::Text),
            "structured" | "json" => Ok(Format::Structured),
            other => Err(GpmError::Config(format!("unknown format {other:?}"))),
        }
    }
}

/// A point pair, with supplies and demands in transport mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub p: u32,
    pub q: u32,
    pub a: Vec<Point>,
    pub b: Vec<Point>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub supply: Option<Vec<i64>>,
    /// Demands as nonnegative amounts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub demand: Option<Vec<i64>>,
}

impl Instance {
    pub fn params(&self) -> Result<CostParams> {
        CostParams::new(self.p, self.q)
    }

    pub fn is_transport(&self) -> bool {
        self.supply.is_some()
    }

    /// Supplies on all records or none, balanced, ids dense.
    pub fn validate(&self) -> Result<()> {
        self.params()?;
        gpm_core::geometry::validate_set(&self.a)?;
        gpm_core::geometry::validate_set(&self.b)?;
        match (&self.supply, &self.demand) {
            (None, None) => Ok(()),
            (Some(s), Some(d)) => gpm_core::transport::validate_instance(&self.a, &self.b, s, d),
            _ => Err(GpmError::Config(
                "supplies and demands must be given together".into(),
            )),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "GPM 1 {} {} {} {}", self.p, self.q, self.a.len(), self.b.len());
        for (tag, pts, amounts) in [("A", &self.a, &self.supply), ("B", &self.b, &self.demand)] {
            for (i, pt) in pts.iter().enumerate() {
                let _ = write!(out, "{tag} {} {}", real(pt.x), real(pt.y));
                if let Some(v) = amounts {
                    let _ = write!(out, " {}", v[i]);
                }
                out.push('\n');
            }
        }
        out
    }

    pub fn parse_text(text: &str) -> Result<Instance> {
        let mut lines = content_lines(text);
        let (no, header) = lines.next().ok_or(GpmError::Parse {
            line: 1,
            msg: "empty instance".into(),
        })?;
        let f: Vec<&str> = header.split_whitespace().collect();
        if f.len() != 6 || f[0] != "GPM" || f[1] != "1" {
            return Err(GpmError::Parse {
                line: no,
                msg: "expected header \"GPM 1 <p> <q> <r> <n>\"".into(),
            });
        }
        let p: u32 = field(f[2], no)?;
        let q: u32 = field(f[3], no)?;
        let r: usize = field(f[4], no)?;
        let n: usize = field(f[5], no)?;
        let mut a = Vec::with_capacity(r);
        let mut b = Vec::with_capacity(n);
        let mut supply = Vec::new();
        let mut demand = Vec::new();
        let mut with_amount = None;
        for (no, line) in lines {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f[0] == "A" && !b.is_empty() {
                return Err(GpmError::Parse {
                    line: no,
                    msg: "A records must precede B records".into(),
                });
            }
            let (pts, amounts, want) = match f[0] {
                "A" => (&mut a, &mut supply, r),
                "B" => (&mut b, &mut demand, n),
                other => {
                    return Err(GpmError::Parse {
                        line: no,
                        msg: format!("unknown record {other:?}"),
                    })
                }
            };
            if pts.len() == want {
                return Err(GpmError::Parse {
                    line: no,
                    msg: format!("more than {want} {} records", f[0]),
                });
            }
            let has = match f.len() {
                3 => false,
                4 => true,
                _ => {
                    return Err(GpmError::Parse {
                        line: no,
                        msg: "expected \"<tag> <x> <y> [amount]\"".into(),
                    })
                }
            };
            if *with_amount.get_or_insert(has) != has {
                return Err(GpmError::Parse {
                    line: no,
                    msg: "amounts must be given on all records or none".into(),
                });
            }
            let id = pts.len() as u32;
            pts.push(Point::new(field(f[1], no)?, field(f[2], no)?, id));
            if has {
                amounts.push(field(f[3], no)?);
            }
        }
        if a.len() != r || b.len() != n {
            return Err(GpmError::Parse {
                line: text.lines().count(),
                msg: format!("header announces {r} A and {n} B records, found {} and {}", a.len(), b.len()),
            });
        }
        let transport = with_amount == Some(true);
        let inst = Instance {
            p,
            q,
            a,
            b,
            supply: transport.then_some(supply),
            demand: transport.then_some(demand),
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn serialize(&self, format: Format) -> String {
        match format {
            Format::Text => self.to_text(),
            Format::Structured => {
                serde_json::to_string_pretty(self).expect("instances serialize") + "\n"
            }
        }
    }

    /// Text or JSON, detected from the first non-blank character.
    pub fn parse(text: &str) -> Result<Instance> {
        if text.trim_start().starts_with('{') {
            let inst: Instance = serde_json::from_str(text).map_err(json_error)?;
            inst.validate()?;
            Ok(inst)
        } else {
            Instance::parse_text(text)
        }
    }

    pub fn load(path: &Path) -> Result<Instance> {
        Instance::parse(&std::fs::read_to_string(path)?)
    }
}

/// Pairs or transport arcs as `(a_id, b_id, flow)`, with the total cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub pairs: Vec<(u32, u32, f64)>,
    pub cost: f64,
}

impl From<&Matching> for Solution {
    fn from(m: &Matching) -> Self {
        Solution {
            pairs: m.pairs.iter().map(|&(x, y)| (x, y, 1.0)).collect(),
            cost: m.cost,
        }
    }
}

impl From<&TransportPlan> for Solution {
    fn from(p: &TransportPlan) -> Self {
        Solution {
            pairs: p.flows.clone(),
            cost: p.cost,
        }
    }
}

impl Solution {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for &(x, y, f) in &self.pairs {
            let _ = writeln!(out, "PAIR {x} {y} {}", amount(f));
        }
        let _ = writeln!(out, "COST {}", real(self.cost));
        out
    }

    pub fn parse_text(text: &str) -> Result<Solution> {
        let mut pairs = Vec::new();
        let mut cost = None;
        for (no, line) in content_lines(text) {
            if cost.is_some() {
                return Err(GpmError::Parse {
                    line: no,
                    msg: "records after COST".into(),
                });
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            match (f[0], f.len()) {
                ("PAIR", 4) => pairs.push((field(f[1], no)?, field(f[2], no)?, field(f[3], no)?)),
                ("COST", 2) => cost = Some(field(f[1], no)?),
                _ => {
                    return Err(GpmError::Parse {
                        line: no,
                        msg: "expected \"PAIR <a> <b> <flow>\" or \"COST <value>\"".into(),
                    })
                }
            }
        }
        let cost = cost.ok_or(GpmError::Parse {
            line: text.lines().count().max(1),
            msg: "missing COST line".into(),
        })?;
        Ok(Solution { pairs, cost })
    }

    pub fn serialize(&self, format: Format) -> String {
        match format {
            Format::Text => self.to_text(),
            Format::Structured => {
                serde_json::to_string_pretty(self).expect("solutions serialize") + "\n"
            }
        }
    }

    pub fn parse(text: &str) -> Result<Solution> {
        if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(json_error)
        } else {
            Solution::parse_text(text)
        }
    }

    pub fn load(path: &Path) -> Result<Solution> {
        Solution::parse(&std::fs::read_to_string(path)?)
    }
}

/// 17 significant digits; integers stay plain.
pub fn real(x: f64) -> String {
    if x == x.trunc() && x.abs() < 1e15 {
        format!("{x:.1}")
    } else {
        format!("{x:.16e}")
    }
}

fn amount(x: f64) -> String {
    if x == x.trunc() && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        real(x)
    }
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn field<T: FromStr>(s: &str, line: usize) -> Result<T> {
    s.parse().map_err(|_| GpmError::Parse {
        line,
        msg: format!("cannot parse {s:?}"),
    })
}

fn json_error(e: serde_json::Error) -> GpmError {
    GpmError::Parse {
        line: e.line(),
        msg: e.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reals_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 123456.0, 1e300, f64::MIN_POSITIVE] {
            assert_eq!(real(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn mixed_amounts_are_rejected() {
        let text = "GPM 1 2 1 2 1\nA 0 0 1\nA 1 1\nB 0 0 1\n";
        let err = Instance::parse_text(text).unwrap_err();
        assert!(matches!(err, GpmError::Parse { line: 3, .. }), "{err}");
    }
}
