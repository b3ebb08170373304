//! Result rows and CSV output.

use std::cmp::Ordering;
use std::fmt::Write as _;

#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Num(f64),
    Text(String),
}

/// One CSV row. `sort_param` and `sort_point` order rows numerically within
/// a parameter string and a metric; they are not written.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub experiment: String,
    pub family: String,
    pub n: Option<usize>,
    pub param: String,
    pub nbar: Option<f64>,
    pub kappa_t: Option<f64>,
    pub kappa_phi_t: Option<f64>,
    pub scheme: String,
    pub metric: String,
    pub value: Value,
    pub runtime_s: Option<f64>,
    pub cache_hit: bool,
    pub sort_param: Vec<f64>,
    pub sort_point: Vec<f64>,
}

pub const HEADER: &str = "experiment,family,N,param,nbar,kappa_t,kappa_phi_t,scheme,metric,value,runtime_s,cache_hit";

fn cmp_opt(a: Option<f64>, b: Option<f64>) -> Ordering {
    match (a, b) {
        (Some(x), Some(y)) => x.total_cmp(&y),
        (a, b) => a.is_some().cmp(&b.is_some()),
    }
}

fn cmp_vec(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        let o = x.total_cmp(y);
        if o != Ordering::Equal {
            return o;
        }
    }
    a.len().cmp(&b.len())
}

impl ResultRow {
    /// Order on the config tuple.
    pub fn cmp_key(&self, o: &Self) -> Ordering {
        self.experiment
            .cmp(&o.experiment)
            .then_with(|| self.family.cmp(&o.family))
            .then_with(|| self.n.cmp(&o.n))
            .then_with(|| cmp_vec(&self.sort_param, &o.sort_param))
            .then_with(|| self.param.cmp(&o.param))
            .then_with(|| cmp_opt(self.kappa_t, o.kappa_t))
            .then_with(|| cmp_opt(self.kappa_phi_t, o.kappa_phi_t))
            .then_with(|| self.scheme.cmp(&o.scheme))
            .then_with(|| self.metric.cmp(&o.metric))
            .then_with(|| cmp_vec(&self.sort_point, &o.sort_point))
            .then_with(|| match (&self.value, &o.value) {
                (Value::Num(a), Value::Num(b)) => a.total_cmp(b),
                (Value::Text(a), Value::Text(b)) => a.cmp(b),
                (Value::Num(_), Value::Text(_)) => Ordering::Less,
                (Value::Text(_), Value::Num(_)) => Ordering::Greater,
            })
    }
}

pub fn sort_rows(rows: &mut [ResultRow]) {
    rows.sort_by(|a, b| a.cmp_key(b));
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// RFC 4180 quoting.
pub fn quote(field: &str) -> String {
    if field.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

pub fn to_csv(rows: &[ResultRow]) -> String {
    let mut out = String::with_capacity(128 * (rows.len() + 1));
    out.push_str(HEADER);
    out.push('\n');
    for r in rows {
        let value = match &r.value {
            Value::Num(v) => num(*v),
            Value::Text(t) => t.clone(),
        };
        let fields = [
            r.experiment.clone(),
            r.family.clone(),
            r.n.map(|n| n.to_string()).unwrap_or_default(),
            r.param.clone(),
            opt(r.nbar),
            opt(r.kappa_t),
            opt(r.kappa_phi_t),
            r.scheme.clone(),
            r.metric.clone(),
            value,
            opt(r.runtime_s),
            r.cache_hit.to_string(),
        ];
        let line: Vec<String> = fields.iter().map(|f| quote(f)).collect();
        let _ = writeln!(out, "{}", line.join(","));
    }
    out
}
