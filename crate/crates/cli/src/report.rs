//! Run reports and their serialization.
//!
//! Numbers are written at 17 significant digits (`{:.16e}`), enough to
//! round-trip every f64 bit-exactly, and the JSON emitter keeps a fixed key
//! order so identical runs produce identical bytes.

use crate::error::escape_json;

/// Format a float at 17 significant digits.
pub fn fmt17(v: f64) -> String {
    format!("{:.16e}", v)
}

/// Minimal JSON document model with deterministic rendering.
#[derive(Debug, Clone)]
pub enum Json {
    Null,
    Bool(bool),
    Int(i64),
    Num(f64),
    Str(String),
    Arr(Vec<Json>),
    Obj(Vec<(&'static str, Json)>),
}

impl Json {
    pub fn render(&self) -> String {
        let mut out = String::new();
        self.write(&mut out, 0);
        out.push('\n');
        out
    }

    fn write(&self, out: &mut String, indent: usize) {
        match self {
            Json::Null => out.push_str("null"),
            Json::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
            Json::Int(i) => out.push_str(&i.to_string()),
            Json::Num(v) => out.push_str(&fmt17(*v)),
            Json::Str(s) => {
                out.push('"');
                out.push_str(&escape_json(s));
                out.push('"');
            }
            Json::Arr(items) => {
                if items.is_empty() {
                    out.push_str("[]");
                    return;
                }
                out.push('[');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    out.push('\n');
                    out.push_str(&"  ".repeat(indent + 1));
                    item.write(out, indent + 1);
                }
                out.push('\n');
                out.push_str(&"  ".repeat(indent));
                out.push(']');
            }
            Json::Obj(fields) => {
                if fields.is_empty() {
                    out.push_str("{}");
                    return;
                }
                out.push('{');
                for (i, (key, value)) in fields.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    out.push('\n');
                    out.push_str(&"  ".repeat(indent + 1));
                    out.push('"');
                    out.push_str(key);
                    out.push_str("\": ");
                    value.write(out, indent + 1);
                }
                out.push('\n');
                out.push_str(&"  ".repeat(indent));
                out.push('}');
            }
        }
    }
}

fn opt_num(v: Option<f64>) -> Json {
    v.map(Json::Num).unwrap_or(Json::Null)
}

/// Per-family identity results. Every identity carries its residual.
#[derive(Debug, Clone)]
pub struct FamilyReport {
    pub family: String,
    pub jarzynski_average: f64,
    pub jarzynski_residual: f64,
    pub max_crooks_residual: f64,
    /// `None` encodes a +∞ divergence (forward mass outside the reverse
    /// support).
    pub f_divergence: Option<f64>,
    pub forward_atoms: usize,
    pub reverse_atoms: usize,
    pub forward_mass_residual: f64,
    pub reverse_mass_residual: f64,
}

impl FamilyReport {
    fn to_json(&self) -> Json {
        Json::Obj(vec![
            ("family", Json::Str(self.family.clone())),
            ("jarzynski_average", Json::Num(self.jarzynski_average)),
            ("jarzynski_residual", Json::Num(self.jarzynski_residual)),
            ("max_crooks_residual", Json::Num(self.max_crooks_residual)),
            (
                "f_divergence",
                match self.f_divergence {
                    Some(v) => Json::Num(v),
                    None => Json::Str("infinite".into()),
                },
            ),
            ("forward_atoms", Json::Int(self.forward_atoms as i64)),
            ("reverse_atoms", Json::Int(self.reverse_atoms as i64)),
            (
                "forward_mass_residual",
                Json::Num(self.forward_mass_residual),
            ),
            (
                "reverse_mass_residual",
                Json::Num(self.reverse_mass_residual),
            ),
        ])
    }
}

#[derive(Debug, Clone)]
pub struct TableDigest {
    pub rows: usize,
    pub sha256: String,
}

impl TableDigest {
    fn to_json(&self) -> Json {
        Json::Obj(vec![
            ("rows", Json::Int(self.rows as i64)),
            ("sha256", Json::Str(self.sha256.clone())),
        ])
    }
}

#[derive(Debug, Clone)]
pub struct SteadyStateReport {
    pub labels: Vec<String>,
    pub gamma: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub kind: String,
    pub seed: Option<u64>,
    pub merge_tol: f64,
    pub identity_tol: f64,
    pub crooks_tol: f64,
    pub supports_coincide: bool,
    pub beta: Option<f64>,
    pub delta_f: Option<f64>,
    pub efficacy: Option<f64>,
    pub steady_state: Option<SteadyStateReport>,
    pub families: Vec<FamilyReport>,
    pub joint_table: TableDigest,
    pub measures_table: TableDigest,
    pub pass: bool,
}

impl RunReport {
    pub fn to_json(&self) -> Json {
        Json::Obj(vec![
            ("schema_version", Json::Int(1)),
            ("kind", Json::Str(self.kind.clone())),
            (
                "seed",
                self.seed.map(|s| Json::Int(s as i64)).unwrap_or(Json::Null),
            ),
            ("merge_tol", Json::Num(self.merge_tol)),
            (
                "tolerances",
                Json::Obj(vec![
                    ("identity", Json::Num(self.identity_tol)),
                    ("crooks", Json::Num(self.crooks_tol)),
                ]),
            ),
            ("supports_coincide", Json::Bool(self.supports_coincide)),
            ("beta", opt_num(self.beta)),
            ("delta_f", opt_num(self.delta_f)),
            ("efficacy", opt_num(self.efficacy)),
            (
                "steady_state",
                match &self.steady_state {
                    Some(ss) => Json::Obj(vec![
                        (
                            "labels",
                            Json::Arr(ss.labels.iter().cloned().map(Json::Str).collect()),
                        ),
                        ("gamma", Json::Arr(ss.gamma.iter().copied().map(Json::Num).collect())),
                    ]),
                    None => Json::Null,
                },
            ),
            (
                "families",
                Json::Arr(self.families.iter().map(FamilyReport::to_json).collect()),
            ),
            (
                "tables",
                Json::Obj(vec![
                    ("joint", self.joint_table.to_json()),
                    ("measures", self.measures_table.to_json()),
                ]),
            ),
            ("pass", Json::Bool(self.pass)),
        ])
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for &v in &[
            1.0,
            std::f64::consts::PI,
            2.0f64.ln(),
            1e-300,
            -3.333333333333333e-5,
        ] {
            let parsed: f64 = fmt17(v).parse().unwrap();
            assert_eq!(parsed.to_bits(), v.to_bits());
        }
    }

    #[test]
    fn json_rendering_is_stable() {
        let doc = Json::Obj(vec![
            ("a", Json::Num(0.5)),
            ("b", Json::Arr(vec![Json::Int(1), Json::Null])),
        ]);
        assert_eq!(doc.render(), doc.render());
        assert!(doc.render().contains("5.0000000000000000e-1"));
    }
}
