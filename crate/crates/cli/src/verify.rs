//! Recheck a run directory from its emitted files alone: parse the CSVs
//! back (17-digit fields round-trip f64 exactly), recompute every identity,
//! and compare with `summary.json`.

use std::collections::BTreeMap;
use std::path::Path;

use serde_json::Value;

use retrodiction::fluctuation::{
    crooks_residuals, max_crooks_residual, DiscreteMeasure, FFamily,
};

use crate::error::{io_err, CliError, CliResult};
use crate::report::sha256_hex;
use crate::schema::FamilySpec;

pub struct VerifyOutcome {
    /// All recomputed identities are within the recorded tolerances.
    pub identities_ok: bool,
    /// The artifacts are internally consistent (digests, summary values
    /// equal to recomputation).
    pub artifacts_ok: bool,
    pub lines: Vec<String>,
}

impl VerifyOutcome {
    pub fn ok(&self) -> bool {
        self.identities_ok && self.artifacts_ok
    }
}

struct JointRow {
    p_f: f64,
    p_r: f64,
    ratio: Option<f64>,
    omega_f: Vec<Option<f64>>,
    omega_r: Vec<Option<f64>>,
}

fn get_f64(value: &Value, path: &str) -> CliResult<f64> {
    value.as_f64().ok_or_else(|| CliError::Verify {
        message: format!("summary.json: {path} is not a number"),
    })
}

pub fn verify_dir(dir: &Path) -> CliResult<VerifyOutcome> {
    let summary_path = dir.join("summary.json");
    let summary_text =
        std::fs::read_to_string(&summary_path).map_err(|e| io_err(&summary_path, e))?;
    let summary: Value = serde_json::from_str(&summary_text).map_err(|e| CliError::Parse {
        line: e.line(),
        column: e.column(),
        message: format!("summary.json: {e}"),
    })?;
    let identity_tol = get_f64(&summary["tolerances"]["identity"], "tolerances.identity")?;
    let crooks_tol = get_f64(&summary["tolerances"]["crooks"], "tolerances.crooks")?;
    let merge_tol = get_f64(&summary["merge_tol"], "merge_tol")?;
    let supports_coincide = summary["supports_coincide"].as_bool().unwrap_or(true);
    let family_entries = summary["families"].as_array().ok_or_else(|| {
        CliError::Verify {
            message: "summary.json: families is not an array".into(),
        }
    })?;
    let family_labels: Vec<String> = family_entries
        .iter()
        .map(|f| {
            f["family"]
                .as_str()
                .map(str::to_string)
                .ok_or_else(|| CliError::Verify {
                    message: "summary.json: family entry without a label".into(),
                })
        })
        .collect::<CliResult<_>>()?;
    let families: Vec<FFamily<f64>> = family_labels
        .iter()
        .map(|label| FamilySpec::from_label(label))
        .collect::<CliResult<_>>()?;

    let joint_path = dir.join("joint.csv");
    let joint_text = std::fs::read_to_string(&joint_path).map_err(|e| io_err(&joint_path, e))?;
    let measures_path = dir.join("measures.csv");
    let measures_text =
        std::fs::read_to_string(&measures_path).map_err(|e| io_err(&measures_path, e))?;

    let mut lines = Vec::new();
    let mut identities_ok = true;
    let mut artifacts_ok = true;

    // digests must match the summary
    for (name, text, expected) in [
        ("joint.csv", &joint_text, &summary["tables"]["joint"]["sha256"]),
        (
            "measures.csv",
            &measures_text,
            &summary["tables"]["measures"]["sha256"],
        ),
    ] {
        let actual = sha256_hex(text.as_bytes());
        let matches = expected.as_str() == Some(actual.as_str());
        artifacts_ok &= matches;
        lines.push(format!(
            "digest {name}: {}",
            if matches { "match" } else { "MISMATCH" }
        ));
    }

    let rows = parse_joint(&joint_text, &family_labels)?;

    // ratio consistency against the stored joints
    let mut worst_ratio = 0.0f64;
    for row in &rows {
        if let Some(ratio) = row.ratio {
            let direct = row.p_f / row.p_r;
            worst_ratio = worst_ratio.max((direct - ratio).abs() / ratio.max(1.0));
        }
    }
    identities_ok &= worst_ratio <= 1e-12;
    lines.push(format!("ratio consistency: max residual {worst_ratio:e}"));

    // ω consistency and the Jarzynski average per family
    for (k, family) in families.iter().enumerate() {
        let mut worst_omega = 0.0f64;
        let mut average = 0.0f64;
        for row in &rows {
            if let (Some(ratio), Some(wf), Some(wr)) =
                (row.ratio, row.omega_f[k], row.omega_r[k])
            {
                let expect_wf = family.f(ratio);
                let scale = wf.abs().max(1.0);
                worst_omega = worst_omega.max((expect_wf - wf).abs() / scale);
                worst_omega = worst_omega.max((family.g(wf) - wr).abs() / wr.abs().max(1.0));
            }
            if row.p_f > 0.0 {
                if let Some(wf) = row.omega_f[k] {
                    average += row.p_f * family.f_inverse(family.g(wf));
                }
            }
        }
        identities_ok &= worst_omega <= 1e-12;
        let summary_avg = get_f64(
            &family_entries[k]["jarzynski_average"],
            "families[].jarzynski_average",
        )?;
        let drift = (average - summary_avg).abs();
        artifacts_ok &= drift <= 1e-13;
        let residual = (average - 1.0).abs();
        if supports_coincide {
            identities_ok &= residual <= identity_tol;
        }
        lines.push(format!(
            "{}: omega residual {worst_omega:e}, jarzynski average {average:.17e} \
             (summary drift {drift:e})",
            family_labels[k]
        ));
    }

    // rebuild the measures and recheck the atom relation
    let atoms = parse_measures(&measures_text)?;
    for (k, family) in families.iter().enumerate() {
        let label = &family_labels[k];
        let forward = atoms
            .get(&(label.clone(), "forward".to_string()))
            .cloned()
            .unwrap_or_default();
        let reverse = atoms
            .get(&(label.clone(), "reverse".to_string()))
            .cloned()
            .unwrap_or_default();
        let mu_f = DiscreteMeasure::from_atoms(forward, merge_tol)?;
        let mu_r = DiscreteMeasure::from_atoms(reverse, merge_tol)?;
        // total masses must match the joints
        let pf_total: f64 = rows.iter().map(|r| r.p_f).sum();
        let pr_total: f64 = rows.iter().map(|r| r.p_r).sum();
        let mass_drift = (mu_f.total_mass() - pf_total)
            .abs()
            .max((mu_r.total_mass() - pr_total).abs());
        // leaked support keeps some reverse mass off the common pairs
        if supports_coincide {
            artifacts_ok &= mass_drift <= 1e-11;
        }
        let crooks = crooks_residuals(&mu_f, &mu_r, family)?;
        let max_residual = max_crooks_residual(&crooks);
        if supports_coincide {
            identities_ok &= max_residual <= crooks_tol;
        }
        let summary_crooks = get_f64(
            &family_entries[k]["max_crooks_residual"],
            "families[].max_crooks_residual",
        )?;
        artifacts_ok &= (max_residual - summary_crooks).abs() <= 1e-13;
        lines.push(format!(
            "{label}: crooks residual {max_residual:e}, measure mass drift {mass_drift:e}"
        ));
    }

    Ok(VerifyOutcome {
        identities_ok,
        artifacts_ok,
        lines,
    })
}

fn parse_joint(text: &str, family_labels: &[String]) -> CliResult<Vec<JointRow>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| CliError::Verify {
            message: format!("joint.csv: {e}"),
        })?
        .clone();
    let column = |name: &str| -> CliResult<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Verify {
                message: format!("joint.csv: missing column {name}"),
            })
    };
    let pf_col = column("P_F")?;
    let pr_col = column("P_R")?;
    let ratio_col = column("ratio")?;
    let omega_cols: Vec<(usize, usize)> = if family_labels.len() == 1 {
        vec![(column("omega_F")?, column("omega_R")?)]
    } else {
        family_labels
            .iter()
            .map(|label| {
                Ok((
                    column(&format!("omega_F[{label}]"))?,
                    column(&format!("omega_R[{label}]"))?,
                ))
            })
            .collect::<CliResult<_>>()?
    };
    let parse_opt = |field: &str, what: &str| -> CliResult<Option<f64>> {
        if field.is_empty() {
            return Ok(None);
        }
        field.parse().map(Some).map_err(|_| CliError::Verify {
            message: format!("joint.csv: unparseable {what} value `{field}`"),
        })
    };
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::Verify {
            message: format!("joint.csv: {e}"),
        })?;
        let p_f: f64 = record[pf_col].parse().map_err(|_| CliError::Verify {
            message: "joint.csv: unparseable P_F".into(),
        })?;
        let p_r: f64 = record[pr_col].parse().map_err(|_| CliError::Verify {
            message: "joint.csv: unparseable P_R".into(),
        })?;
        let ratio = parse_opt(&record[ratio_col], "ratio")?;
        let mut omega_f = Vec::with_capacity(omega_cols.len());
        let mut omega_r = Vec::with_capacity(omega_cols.len());
        for &(fc, rc) in &omega_cols {
            omega_f.push(parse_opt(&record[fc], "omega_F")?);
            omega_r.push(parse_opt(&record[rc], "omega_R")?);
        }
        rows.push(JointRow {
            p_f,
            p_r,
            ratio,
            omega_f,
            omega_r,
        });
    }
    Ok(rows)
}

type AtomMap = BTreeMap<(String, String), Vec<(f64, f64)>>;

fn parse_measures(text: &str) -> CliResult<AtomMap> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut atoms: AtomMap = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::Verify {
            message: format!("measures.csv: {e}"),
        })?;
        let family = record[0].to_string();
        let direction = record[1].to_string();
        let omega: f64 = record[2].parse().map_err(|_| CliError::Verify {
            message: "measures.csv: unparseable omega".into(),
        })?;
        let weight: f64 = record[3].parse().map_err(|_| CliError::Verify {
            message: "measures.csv: unparseable weight".into(),
        })?;
        atoms.entry((family, direction)).or_default().push((omega, weight));
    }
    Ok(atoms)
}
