//! Residual suites and deterministic JSON reports.
//!
//! Keys are sorted (serde_json maps are ordered), scalars are textual, and
//! no timing or environment data is recorded, so identical inputs give
//! byte-identical output.

use serde_json::{json, Map, Value};

use twistgeo::algebra::AlgebraElement;
use twistgeo::connections::Connection;
use twistgeo::modules::Geometry;
use twistgeo::riemann::{classical_christoffel, Einstein, LcResult};
use twistgeo::sampling::{curvature_test_connection, torsion_test_connection};
use twistgeo::scalars::GaussianRational;
use twistgeo::symmetry::twist_laws;
use twistgeo::Result;

use crate::expr::{print_element, print_series};
use crate::geofile::GeometrySpec;

/// Which residual groups `check` runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    Cartan,
    Connection,
    Riemann,
    All,
}

impl Suite {
    fn name(self) -> &'static str {
        match self {
            Suite::Cartan => "cartan",
            Suite::Connection => "connection",
            Suite::Riemann => "riemann",
            Suite::All => "all",
        }
    }

    fn runs(self, group: Suite) -> bool {
        self == Suite::All || self == group
    }
}

/// A report plus the number of failed checks; zero means every residual vanished.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub report: Value,
    pub failures: usize,
}

/// Pretty JSON with a trailing newline.
pub fn render(report: &Value) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("reports serialize");
    s.push('\n');
    s
}

/// Accumulates residual counts while building JSON objects.
#[derive(Default)]
struct Tally {
    failures: usize,
}

impl Tally {
    fn residual(&mut self, n: usize) -> Value {
        if n > 0 {
            self.failures += 1;
        }
        json!(n)
    }

    fn require(&mut self, ok: bool) -> Value {
        if !ok {
            self.failures += 1;
        }
        json!(ok)
    }
}

fn key(idx: &[usize]) -> String {
    idx.iter().map(|i| (i + 1).to_string()).collect::<Vec<_>>().join(",")
}

fn element(geo: &Geometry, a: &AlgebraElement) -> Value {
    Value::String(print_element(geo.alg().kind(), a))
}

fn spec_header(spec: &GeometrySpec) -> Value {
    let geo = &spec.geometry;
    json!({
        "name": spec.name,
        "order": spec.order,
        "kind": format!("{:?}", geo.alg().kind()).to_lowercase(),
        "dim": geo.alg().dim(),
        "generators": geo.alg().generator_count(),
        "invariant_frame": geo.is_invariant(),
        "sha256": spec.sha256,
    })
}

fn twist_section(geo: &Geometry, t: &mut Tally) -> Result<Value> {
    let alg = geo.alg();
    let laws = twist_laws(alg.twist(), alg.twist_inv(), alg.r_matrix())?;
    Ok(json!({
        "cocycle": t.residual(laws.cocycle),
        "normalization": t.residual(laws.normalization),
        "inverse": t.residual(laws.inverse),
        "triangular": t.residual(laws.triangular),
    }))
}

fn cartan_section(spec: &GeometrySpec, seed: u64, t: &mut Tally) -> Result<Value> {
    let report = spec.geometry.cartan_suite(seed, spec.suite.cartan_samples)?;
    let mut relations = Map::new();
    for r in &report.residuals {
        let entry = relations.entry(r.relation.to_string()).or_insert_with(|| Value::Object(Map::new()));
        let row = json!({ "evaluations": r.evaluations, "nonzero_terms": t.residual(r.nonzero_terms) });
        entry.as_object_mut().expect("object").insert(format!("degree {}", r.degree), row);
    }
    Ok(json!({ "samples": spec.suite.cartan_samples, "relations": relations }))
}

/// Identity residuals for one connection.
fn connection_section(spec: &GeometrySpec, conn: &Connection, seed: u64, t: &mut Tally) -> Result<Value> {
    let geo = &spec.geometry;
    let relation = geo.cartan_relation_check(conn, seed, spec.suite.connection_samples)?;
    let (curv, tors) = geo.equivalence_check(conn)?;
    let (s_curv, s_tors) = geo.cartan_structure_check(conn)?;
    let (b_curv, b_tors) = geo.bianchi_check(conn)?;
    Ok(json!({
        "cartan_relation": t.residual(relation),
        "equivalence": { "curvature": t.residual(curv), "torsion": t.residual(tors) },
        "structure_equations": { "curvature": t.residual(s_curv), "torsion": t.residual(s_tors) },
        "bianchi": { "curvature": t.residual(b_curv), "torsion": t.residual(b_tors) },
    }))
}

fn test_connections(geo: &Geometry) -> Vec<(&'static str, Connection)> {
    vec![
        ("zero", Connection::zero(geo)),
        ("s11 = x2*e1", curvature_test_connection(geo)),
        ("s12 = 3/2*e1", torsion_test_connection(geo, GaussianRational::from_ratio(3, 2))),
    ]
}

fn christoffel_table(geo: &Geometry, conn: &Connection) -> Value {
    let n = geo.rank();
    let mut out = Map::new();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                out.insert(key(&[i, j, k]), element(geo, &conn.christoffel(i, j).component(&[k as u8])));
            }
        }
    }
    Value::Object(out)
}

/// True for polynomial algebras with the coordinate frame `e_j = ∂_j`.
fn is_coordinate_frame(geo: &Geometry) -> bool {
    use twistgeo::algebra::{AlgebraKind, Derivation};
    let n = geo.rank();
    geo.alg().kind() == AlgebraKind::Polynomial
        && geo.is_invariant()
        && geo.frame().derivations.iter().enumerate().all(|(i, d)| match d {
            Derivation::Polynomial(v) => (0..n).all(|j| if i == j { v[j] == geo.alg().one() } else { v[j].is_zero() }),
            Derivation::Torus(_) => false,
        })
}

/// Highest `k` such that the Christoffel data and the commutative oracle agree through `h^k`.
fn oracle_agreement(spec: &GeometrySpec, lc: &LcResult) -> Result<i64> {
    let geo = &spec.geometry;
    let oracle = classical_christoffel(geo.alg(), &spec.metric.matrix)?;
    let mut first_diff = spec.order + 1;
    for (i, row) in oracle.iter().enumerate() {
        for (j, col) in row.iter().enumerate() {
            for (k, want) in col.iter().enumerate() {
                let diff = lc.connection.christoffel(i, j).component(&[k as u8]).sub(want);
                for (_, c) in diff.terms() {
                    if let Some(v) = c.valuation() {
                        first_diff = first_diff.min(v);
                    }
                }
            }
        }
    }
    Ok(first_diff as i64 - 1)
}

fn nonzero_table<const D: usize>(geo: &Geometry, entries: impl Iterator<Item = ([usize; D], AlgebraElement)>) -> Value {
    let mut out = Map::new();
    for (idx, a) in entries {
        if !a.is_zero() {
            out.insert(key(&idx), element(geo, &a));
        }
    }
    Value::Object(out)
}

fn riemann_section(spec: &GeometrySpec, seed: u64, t: &mut Tally) -> Result<(Value, LcResult)> {
    let geo = &spec.geometry;
    let n = geo.rank();
    let g = &spec.metric;
    let lc = geo.levi_civita(g)?;
    let r = geo.curvature_sq(&lc.connection)?;
    let tors = geo.torsion(&lc.connection)?;
    let ric = geo.ricci_from(&r)?;
    let einstein = match geo.einstein_check(g, &ric)? {
        Einstein::Proportional { lambda, constant } => {
            json!({ "proportional": true, "lambda": print_series(&lambda, geo.alg().dim()), "lambda_constant_in_h": constant })
        }
        Einstein::Violated { i, j } => json!({ "proportional": false, "first_violation": key(&[i, j]) }),
    };
    let uniq = geo.uniqueness_probe(g, &lc.connection, seed, spec.suite.uniqueness_trials)?;
    let mut metric = Map::new();
    for i in 0..n {
        for j in 0..n {
            metric.insert(key(&[i, j]), element(geo, &g.matrix[i][j]));
        }
    }
    let mut ricci = Map::new();
    for i in 0..n {
        for j in 0..n {
            ricci.insert(key(&[i, j]), element(geo, &ric[i][j]));
        }
    }
    let idx4 = (0..n).flat_map(|i| (0..n).flat_map(move |j| (0..n).flat_map(move |k| (0..n).map(move |l| [i, j, k, l]))));
    let curvature = nonzero_table(geo, idx4.map(|[i, j, k, l]| ([i, j, k, l], r.coeffs[i][j][k][l].clone())));
    let idx3 = (0..n).flat_map(|i| (0..n).flat_map(move |j| (0..n).map(move |l| [i, j, l])));
    let torsion = nonzero_table(geo, idx3.map(|[i, j, l]| ([i, j, l], tors.coeffs[i][j][l].clone())));
    let mut out = json!({
        "metric": metric,
        "normalization": lc.normalization.to_string(),
        "christoffel": christoffel_table(geo, &lc.connection),
        "torsion_residual": t.residual(lc.torsion_residual),
        "compatibility_residual": t.residual(lc.compatibility_residual),
        "curvature": curvature,
        "torsion": torsion,
        "ricci": ricci,
        "einstein": einstein,
        "uniqueness": { "trials": uniq.trials, "detected": uniq.detected, "all_detected": t.require(uniq.detected == uniq.trials) },
    });
    if is_coordinate_frame(geo) {
        let agree = oracle_agreement(spec, &lc)?;
        let obj = out.as_object_mut().expect("object");
        obj.insert("classical_oracle".into(), json!({ "agrees_through_order": agree, "order_zero_agrees": t.require(agree >= 0) }));
    }
    Ok((out, lc))
}

/// Runs the residual suites selected by `suite`.
pub fn check(spec: &GeometrySpec, suite: Suite, seed: u64) -> Result<Outcome> {
    let geo = &spec.geometry;
    let mut t = Tally::default();
    let mut report = Map::new();
    report.insert("spec".into(), spec_header(spec));
    report.insert("suite".into(), json!(suite.name()));
    report.insert("seed".into(), json!(seed));
    if suite.runs(Suite::Cartan) {
        report.insert("twist_laws".into(), twist_section(geo, &mut t)?);
        report.insert("cartan".into(), cartan_section(spec, seed, &mut t)?);
    }
    let mut connections = Map::new();
    if suite.runs(Suite::Connection) {
        for (name, conn) in test_connections(geo) {
            connections.insert(name.into(), connection_section(spec, &conn, seed, &mut t)?);
        }
    }
    if suite.runs(Suite::Riemann) {
        let (riemann, lc) = riemann_section(spec, seed, &mut t)?;
        report.insert("riemann".into(), riemann);
        connections.insert("levi_civita".into(), connection_section(spec, &lc.connection, seed, &mut t)?);
    }
    if !connections.is_empty() {
        report.insert("connections".into(), Value::Object(connections));
    }
    report.insert("failures".into(), json!(t.failures));
    report.insert("status".into(), json!(if t.failures == 0 { "pass" } else { "fail" }));
    Ok(Outcome { report: Value::Object(report), failures: t.failures })
}

/// The Levi-Civita solve: Christoffel table, residuals and Koszul table.
pub fn levi_civita(spec: &GeometrySpec) -> Result<Outcome> {
    let geo = &spec.geometry;
    let n = geo.rank();
    let mut t = Tally::default();
    let lc = geo.levi_civita(&spec.metric)?;
    let mut koszul = Map::new();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                koszul.insert(key(&[i, j, k]), element(geo, &lc.koszul[i][j][k]));
            }
        }
    }
    let mut report = json!({
        "spec": spec_header(spec),
        "normalization": lc.normalization.to_string(),
        "christoffel": christoffel_table(geo, &lc.connection),
        "koszul": koszul,
        "torsion_residual": t.residual(lc.torsion_residual),
        "compatibility_residual": t.residual(lc.compatibility_residual),
    });
    if is_coordinate_frame(geo) {
        let agree = oracle_agreement(spec, &lc)?;
        report["classical_oracle"] = json!({ "agrees_through_order": agree, "order_zero_agrees": t.require(agree >= 0) });
    }
    report["failures"] = json!(t.failures);
    report["status"] = json!(if t.failures == 0 { "pass" } else { "fail" });
    Ok(Outcome { report, failures: t.failures })
}
