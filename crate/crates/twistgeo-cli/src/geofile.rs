//! Loader for `.geo` geometry specifications.
//!
//! A spec is sectioned key-value text. `#` starts a comment. Indices are
//! 1-based. An entry that is left out means zero.
//!
//! ```text
//! [geometry]   name = <word>        order = <N>
//! [algebra]    kind = polynomial|torus   dim = <n>   generators = <m>
//!              Z[a](x[j]) = <expr>       (torus: Z[a](U[0,..,1,..,0]) = <c>*U[..])
//! [twist]      F[a,b] = <constant>       F⁻¹ = exp(h Σ c Z_a ⊗ Z_b)
//! [frame]      e[i](x[j]) = <expr>       (torus keys as above)
//!              Z[a] |> e[i] = <constant combination of e[k]>
//!              C[i,j,k] = <expr>         [e_i, e_j] = Σ_k C_ij^k ⋆ e_k
//! [metric]     g[i,j] = <expr>           g0_inverse = [[..], ..]
//! [suite]      seed = <u64>   cartan_samples = <k>   connection_samples = <k>
//!              uniqueness_trials = <k>
//! ```

use std::collections::BTreeMap;
use std::fmt;

use sha2::{Digest, Sha256};

use twistgeo::algebra::{Algebra, AlgebraElement, AlgebraKind, AlgebraSpec, BasisMonomial, Derivation};
use twistgeo::modules::{FrameSpec, Geometry, Matrix};
use twistgeo::riemann::{ElementMatrix, Metric};
use twistgeo::scalars::GaussianRational;
use twistgeo::symmetry::TwistSpec;

use crate::expr::{parse_expression_at, ParseError, Pos, Warning};

/// A spec failure with an optional source position.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpecError {
    pub pos: Option<Pos>,
    pub message: String,
}

impl SpecError {
    fn at(pos: Pos, message: impl Into<String>) -> Self {
        Self { pos: Some(pos), message: message.into() }
    }

    fn global(message: impl Into<String>) -> Self {
        Self { pos: None, message: message.into() }
    }
}

impl fmt::Display for SpecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.pos {
            Some(p) => write!(f, "{p}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for SpecError {}

impl From<ParseError> for SpecError {
    fn from(e: ParseError) -> Self {
        let message = e.to_string();
        let prefix = format!("{}: ", e.pos);
        Self { pos: Some(e.pos), message: message.strip_prefix(&prefix).unwrap_or(&message).to_string() }
    }
}

/// Sample counts and seed for the property suites.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SuiteConfig {
    pub seed: u64,
    pub cartan_samples: usize,
    pub connection_samples: usize,
    pub uniqueness_trials: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self { seed: 0, cartan_samples: 10, connection_samples: 4, uniqueness_trials: 20 }
    }
}

/// A fully validated geometry.
#[derive(Clone, Debug)]
pub struct GeometrySpec {
    pub name: String,
    pub order: usize,
    /// Hex SHA-256 of the source text.
    pub sha256: String,
    pub geometry: Geometry,
    pub metric: Metric,
    pub metric_entries: ElementMatrix,
    pub suite: SuiteConfig,
    pub warnings: Vec<Warning>,
}

struct Entry {
    key: String,
    value: String,
    key_pos: Pos,
    value_pos: Pos,
}

fn split_sections(src: &str) -> Result<BTreeMap<String, Vec<Entry>>, SpecError> {
    let mut sections: BTreeMap<String, Vec<Entry>> = BTreeMap::new();
    let mut current: Option<String> = None;
    for (n, raw) in src.lines().enumerate() {
        let line = n + 1;
        let text = raw.split('#').next().unwrap_or("");
        let trimmed = text.trim();
        if trimmed.is_empty() {
            continue;
        }
        let indent = text.len() - text.trim_start().len();
        let col = |byte: usize| text[..byte].chars().count() + 1;
        if let Some(name) = trimmed.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            let name = name.trim().to_string();
            if sections.contains_key(&name) {
                return Err(SpecError::at(Pos { line, col: col(indent) }, format!("duplicate section [{name}]")));
            }
            sections.insert(name.clone(), Vec::new());
            current = Some(name);
            continue;
        }
        let Some(section) = &current else {
            return Err(SpecError::at(Pos { line, col: col(indent) }, "entry before the first section header"));
        };
        let Some(eq) = text.find('=') else {
            return Err(SpecError::at(Pos { line, col: col(indent) }, "expected `key = value`"));
        };
        let value_raw = &text[eq + 1..];
        let value_start = eq + 1 + (value_raw.len() - value_raw.trim_start().len());
        sections.get_mut(section).expect("section exists").push(Entry {
            key: text[..eq].trim().to_string(),
            value: value_raw.trim().to_string(),
            key_pos: Pos { line, col: col(indent) },
            value_pos: Pos { line, col: col(value_start) },
        });
    }
    Ok(sections)
}

fn take_section(sections: &mut BTreeMap<String, Vec<Entry>>, name: &str) -> Result<Vec<Entry>, SpecError> {
    sections.remove(name).ok_or_else(|| SpecError::global(format!("missing section [{name}]")))
}

fn scalar_field<T: std::str::FromStr>(entries: &[Entry], key: &str) -> Result<Option<T>, SpecError> {
    match entries.iter().find(|e| e.key == key) {
        None => Ok(None),
        Some(e) => e.value.parse().map(Some).map_err(|_| SpecError::at(e.value_pos, format!("invalid value for `{key}`"))),
    }
}

fn required<T>(v: Option<T>, section: &str, key: &str) -> Result<T, SpecError> {
    v.ok_or_else(|| SpecError::global(format!("[{section}] is missing `{key}`")))
}

/// Parses `name[a,b,..]` into 1-based indices.
fn indexed<'a>(key: &'a str, name: &str) -> Option<(Vec<usize>, &'a str)> {
    let rest = key.strip_prefix(name)?.trim_start().strip_prefix('[')?;
    let close = rest.find(']')?;
    let idx: Option<Vec<usize>> = rest[..close].split(',').map(|s| s.trim().parse().ok()).collect();
    Some((idx?, rest[close + 1..].trim()))
}

/// Index range check; returns the 0-based index.
fn resolve(pos: Pos, what: &str, i: usize, n: usize) -> Result<usize, SpecError> {
    if i == 0 || i > n {
        return Err(SpecError::at(pos, format!("{what} index {i} out of range 1..={n}")));
    }
    Ok(i - 1)
}

fn ranged(pos: Pos, what: &str, idx: &[usize], n: usize) -> Result<Vec<usize>, SpecError> {
    idx.iter().map(|&i| resolve(pos, what, i, n)).collect()
}

/// Parses `(x[j])` or the torus form `(U[0,..,1,..,0])` into the generator index.
fn generator_argument(rest: &str, pos: Pos, kind: AlgebraKind, dim: usize) -> Result<usize, SpecError> {
    let inner = rest
        .strip_prefix('(')
        .and_then(|s| s.strip_suffix(')'))
        .map(str::trim)
        .ok_or_else(|| SpecError::at(pos, "expected `(x[j])` after the derivation name"))?;
    if let Some((idx, tail)) = indexed(inner, "x") {
        if idx.len() == 1 && tail.is_empty() {
            return resolve(pos, "generator", idx[0], dim);
        }
    }
    if kind == AlgebraKind::Torus {
        if let Some((idx, tail)) = indexed(inner, "U") {
            let ones: Vec<usize> = idx.iter().enumerate().filter(|(_, &v)| v != 0).map(|(k, _)| k).collect();
            if tail.is_empty() && idx.len() == dim && ones.len() == 1 && idx[ones[0]] == 1 {
                return Ok(ones[0]);
            }
        }
    }
    Err(SpecError::at(pos, format!("invalid generator argument `{inner}`")))
}

struct Ctx {
    alg: Algebra,
    warnings: Vec<Warning>,
}

impl Ctx {
    fn expr(&mut self, e: &Entry) -> Result<AlgebraElement, SpecError> {
        let (value, w) = parse_expression_at(&e.value, &self.alg, e.value_pos)?;
        self.warnings.extend(w);
        Ok(value)
    }
}

fn constant_of(a: &AlgebraElement, pos: Pos) -> Result<GaussianRational, SpecError> {
    let c = a.constant_part();
    if a.terms().any(|(m, _)| !m.is_one()) || (1..=c.order()).any(|k| !c.coeff(k).is_zero()) {
        return Err(SpecError::at(pos, "expected a constant (no generators, no h)"));
    }
    Ok(c.coeff(0).clone())
}

/// Order-zero constant parsed with a throwaway context of the given order.
fn constant_value(src: &str, pos: Pos, dim: usize) -> Result<GaussianRational, SpecError> {
    let alg = plain_algebra(AlgebraKind::Polynomial, dim.max(1), 0);
    let (value, _) = parse_expression_at(src, &alg, pos)?;
    constant_of(&value, pos)
}

fn plain_algebra(kind: AlgebraKind, dim: usize, order: usize) -> Algebra {
    let generators = match kind {
        AlgebraKind::Polynomial => vec![Derivation::Polynomial(vec![AlgebraElement::zero(order); dim])],
        AlgebraKind::Torus => vec![Derivation::Torus(vec![GaussianRational::zero(); dim])],
    };
    Algebra::new(AlgebraSpec { kind, dim, generators }, TwistSpec::trivial(1), order).expect("trivial algebra is valid")
}

/// Builds a derivation from its values on the generators.
fn derivation(kind: AlgebraKind, dim: usize, values: Vec<(AlgebraElement, Pos)>, order: usize) -> Result<Derivation, SpecError> {
    match kind {
        AlgebraKind::Polynomial => Ok(Derivation::Polynomial(values.into_iter().map(|(v, _)| v).collect())),
        AlgebraKind::Torus => {
            let mut weights = Vec::with_capacity(dim);
            for (j, (v, pos)) in values.into_iter().enumerate() {
                let unit = BasisMonomial::unit_vector(j, dim);
                let c = v.coeff(&unit);
                let diagonal = v.terms().all(|(m, _)| *m == unit) && (1..=order).all(|k| c.coeff(k).is_zero());
                if !diagonal {
                    return Err(SpecError::at(pos, "torus derivations must map each unit mode to a constant multiple of itself"));
                }
                weights.push(c.coeff(0).clone());
            }
            Ok(Derivation::Torus(weights))
        }
    }
}

/// Collects `name[a](x[j]) = expr` entries into one derivation per `a`.
fn derivations(
    ctx: &mut Ctx,
    entries: &[Entry],
    name: &str,
    count: usize,
    kind: AlgebraKind,
    dim: usize,
) -> Result<Vec<Derivation>, SpecError> {
    let order = ctx.alg.order();
    let mut values: Vec<Vec<(AlgebraElement, Pos)>> =
        vec![(0..dim).map(|_| (AlgebraElement::zero(order), Pos { line: 0, col: 0 })).collect(); count];
    let mut seen = std::collections::BTreeSet::new();
    for e in entries {
        if !e.key.starts_with(name) || e.key.contains("|>") {
            continue;
        }
        let Some((idx, rest)) = indexed(&e.key, name) else {
            return Err(SpecError::at(e.key_pos, format!("expected `{name}[a](x[j])`")));
        };
        if idx.len() != 1 {
            return Err(SpecError::at(e.key_pos, format!("`{name}` takes one index")));
        }
        let a = resolve(e.key_pos, name, idx[0], count)?;
        let j = generator_argument(rest, e.key_pos, kind, dim)?;
        if !seen.insert((a, j)) {
            return Err(SpecError::at(e.key_pos, format!("duplicate entry `{}`", e.key)));
        }
        values[a][j] = (ctx.expr(e)?, e.value_pos);
    }
    values.into_iter().map(|v| derivation(kind, dim, v, order)).collect()
}

/// Parses a constant combination such as `2*e[1] - 1/2*e[2]`.
fn frame_combination(src: &str, pos: Pos, rank: usize) -> Result<Vec<GaussianRational>, SpecError> {
    let mut out = vec![GaussianRational::zero(); rank];
    let chars: Vec<(usize, char)> = src.char_indices().collect();
    let mut depth = 0i32;
    let mut pieces: Vec<(usize, usize)> = Vec::new();
    let mut start = 0;
    for (k, &(b, c)) in chars.iter().enumerate() {
        match c {
            '(' | '[' => depth += 1,
            ')' | ']' => depth -= 1,
            '+' | '-' if depth == 0 && k > 0 && !src[start..b].trim().is_empty() => {
                pieces.push((start, b));
                start = b;
            }
            _ => {}
        }
    }
    pieces.push((start, src.len()));
    for (s, t) in pieces {
        let piece = &src[s..t];
        let at = Pos { line: pos.line, col: pos.col + src[..s].chars().count() };
        let Some(e_at) = piece.find("e[") else {
            return Err(SpecError::at(at, "each term needs a frame element `e[k]`"));
        };
        let close = piece[e_at..].find(']').map(|c| e_at + c).ok_or_else(|| SpecError::at(at, "unclosed `e[`"))?;
        let k: usize = piece[e_at + 2..close].trim().parse().map_err(|_| SpecError::at(at, "invalid frame index"))?;
        let k = resolve(at, "frame", k, rank)?;
        if !piece[close + 1..].trim().is_empty() {
            return Err(SpecError::at(at, "the frame element must end its term"));
        }
        let coeff_src = piece[..e_at].trim();
        let (sign, body) = match coeff_src.strip_prefix('-') {
            Some(b) => (-GaussianRational::one(), b.trim()),
            None => (GaussianRational::one(), coeff_src.strip_prefix('+').unwrap_or(coeff_src).trim()),
        };
        let body = body.strip_suffix('*').unwrap_or(body).trim();
        let c = if body.is_empty() { GaussianRational::one() } else { constant_value(body, at, 1)? };
        out[k] += &(sign * c);
    }
    Ok(out)
}

/// Parses `[[a, b], [c, d]]` into a constant matrix.
fn constant_matrix(src: &str, pos: Pos, n: usize) -> Result<Matrix, SpecError> {
    let bad = || SpecError::at(pos, format!("expected a {n}x{n} matrix `[[..], ..]`"));
    let inner = src.trim().strip_prefix('[').and_then(|s| s.strip_suffix(']')).ok_or_else(bad)?;
    let mut rows = Vec::new();
    let mut rest = inner.trim();
    while !rest.is_empty() {
        let open = rest.strip_prefix('[').ok_or_else(bad)?;
        let close = open.find(']').ok_or_else(bad)?;
        let row: Result<Vec<GaussianRational>, SpecError> = open[..close].split(',').map(|c| constant_value(c.trim(), pos, 1)).collect();
        rows.push(row?);
        rest = open[close + 1..].trim_start();
        rest = rest.strip_prefix(',').unwrap_or(rest).trim_start();
    }
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(bad());
    }
    Ok(rows)
}

fn reject_unknown(entries: &[Entry], section: &str, known: &dyn Fn(&str) -> bool) -> Result<(), SpecError> {
    match entries.iter().find(|e| !known(&e.key)) {
        Some(e) => Err(SpecError::at(e.key_pos, format!("unknown key `{}` in [{section}]", e.key))),
        None => Ok(()),
    }
}

/// Loads and validates a spec from source text.
pub fn load_geometry_str(src: &str) -> Result<GeometrySpec, SpecError> {
    let mut sections = split_sections(src)?;
    let geometry = take_section(&mut sections, "geometry")?;
    let algebra = take_section(&mut sections, "algebra")?;
    let twist = take_section(&mut sections, "twist")?;
    let frame = take_section(&mut sections, "frame")?;
    let metric = take_section(&mut sections, "metric")?;
    let suite_entries = sections.remove("suite").unwrap_or_default();
    if let Some(name) = sections.keys().next() {
        return Err(SpecError::global(format!("unknown section [{name}]")));
    }

    reject_unknown(&geometry, "geometry", &|k| k == "name" || k == "order")?;
    let name: String = required(scalar_field(&geometry, "name")?, "geometry", "name")?;
    let order: usize = required(scalar_field(&geometry, "order")?, "geometry", "order")?;

    reject_unknown(&algebra, "algebra", &|k| matches!(k, "kind" | "dim" | "generators") || k.starts_with('Z'))?;
    let kind = match required(scalar_field::<String>(&algebra, "kind")?, "algebra", "kind")?.as_str() {
        "polynomial" => AlgebraKind::Polynomial,
        "torus" => AlgebraKind::Torus,
        other => {
            let e = algebra.iter().find(|e| e.key == "kind").expect("kind present");
            return Err(SpecError::at(e.value_pos, format!("unknown algebra kind `{other}` (polynomial|torus)")));
        }
    };
    let dim: usize = required(scalar_field(&algebra, "dim")?, "algebra", "dim")?;
    let generators: usize = required(scalar_field(&algebra, "generators")?, "algebra", "generators")?;
    if dim == 0 || generators == 0 {
        return Err(SpecError::global("[algebra] needs dim >= 1 and generators >= 1"));
    }

    let mut ctx = Ctx { alg: plain_algebra(kind, dim, order), warnings: Vec::new() };
    let gens = derivations(&mut ctx, &algebra, "Z", generators, kind, dim)?;

    reject_unknown(&twist, "twist", &|k| k.starts_with('F'))?;
    let mut pairs = Vec::new();
    for e in &twist {
        let (idx, _) = indexed(&e.key, "F")
            .filter(|(i, r)| i.len() == 2 && r.is_empty())
            .ok_or_else(|| SpecError::at(e.key_pos, "expected `F[a,b]`"))?;
        let ab = ranged(e.key_pos, "symmetry generator", &idx, generators)?;
        let c = constant_value(&e.value, e.value_pos, dim)?;
        if !c.is_zero() {
            pairs.push((ab[0], ab[1], c));
        }
    }
    let spec = AlgebraSpec { kind, dim, generators: gens };
    let alg = Algebra::new(spec, TwistSpec { generators, pairs }, order).map_err(|e| SpecError::global(e.to_string()))?;
    ctx.alg = alg.clone();

    let rank = dim;
    reject_unknown(&frame, "frame", &|k| k.starts_with('e') || k.starts_with('Z') || k.starts_with('C'))?;
    let frame_derivations = derivations(&mut ctx, &frame, "e", rank, kind, dim)?;
    let mut fs = FrameSpec::coordinate(frame_derivations, generators, order);
    for e in &frame {
        if let Some((idx, rest)) = indexed(&e.key, "Z") {
            let Some(target) = rest.strip_prefix("|>") else {
                return Err(SpecError::at(e.key_pos, "expected `Z[a] |> e[i]`"));
            };
            let (ei, tail) = indexed(target.trim(), "e").ok_or_else(|| SpecError::at(e.key_pos, "expected `Z[a] |> e[i]`"))?;
            if idx.len() != 1 || ei.len() != 1 || !tail.is_empty() {
                return Err(SpecError::at(e.key_pos, "expected `Z[a] |> e[i]`"));
            }
            let a = resolve(e.key_pos, "symmetry generator", idx[0], generators)?;
            let i = resolve(e.key_pos, "frame", ei[0], rank)?;
            fs.symmetry_action[a][i] = frame_combination(&e.value, e.value_pos, rank)?;
        } else if let Some((idx, rest)) = indexed(&e.key, "C") {
            if idx.len() != 3 || !rest.is_empty() {
                return Err(SpecError::at(e.key_pos, "expected `C[i,j,k]`"));
            }
            let ijk = ranged(e.key_pos, "frame", &idx, rank)?;
            fs.structure[ijk[0]][ijk[1]][ijk[2]] = ctx.expr(e)?;
        }
    }
    let geo = Geometry::new(alg, fs).map_err(|e| SpecError::global(e.to_string()))?;

    reject_unknown(&metric, "metric", &|k| k.starts_with('g'))?;
    let mut entries = vec![vec![geo.alg().zero(); rank]; rank];
    let mut g0_inverse = None;
    for e in &metric {
        if e.key == "g0_inverse" {
            g0_inverse = Some((constant_matrix(&e.value, e.value_pos, rank)?, e.value_pos));
            continue;
        }
        let (idx, _) = indexed(&e.key, "g")
            .filter(|(i, r)| i.len() == 2 && r.is_empty())
            .ok_or_else(|| SpecError::at(e.key_pos, "expected `g[i,j]`"))?;
        let ij = ranged(e.key_pos, "frame", &idx, rank)?;
        entries[ij[0]][ij[1]] = ctx.expr(e)?;
    }
    let metric = geo.metric(&entries).map_err(|e| SpecError::global(e.to_string()))?;
    if let Some((inv, pos)) = g0_inverse {
        if inv != metric.classical_inverse {
            return Err(SpecError::at(pos, "g0_inverse is not the inverse of the order-0 metric"));
        }
    }

    reject_unknown(&suite_entries, "suite", &|k| matches!(k, "seed" | "cartan_samples" | "connection_samples" | "uniqueness_trials"))?;
    let defaults = SuiteConfig::default();
    let suite = SuiteConfig {
        seed: scalar_field(&suite_entries, "seed")?.unwrap_or(defaults.seed),
        cartan_samples: scalar_field(&suite_entries, "cartan_samples")?.unwrap_or(defaults.cartan_samples),
        connection_samples: scalar_field(&suite_entries, "connection_samples")?.unwrap_or(defaults.connection_samples),
        uniqueness_trials: scalar_field(&suite_entries, "uniqueness_trials")?.unwrap_or(defaults.uniqueness_trials),
    };

    let sha256 = Sha256::digest(src.as_bytes()).iter().map(|b| format!("{b:02x}")).collect();
    Ok(GeometrySpec { name, order, sha256, geometry: geo, metric, metric_entries: entries, suite, warnings: ctx.warnings })
}

/// Reads and validates a spec file.
pub fn load_geometry(path: &std::path::Path) -> Result<GeometrySpec, SpecError> {
    let src = std::fs::read_to_string(path).map_err(|e| SpecError::global(format!("cannot read {}: {e}", path.display())))?;
    load_geometry_str(&src)
}
