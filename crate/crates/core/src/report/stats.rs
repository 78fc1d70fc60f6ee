use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;

use serde::{Deserialize, Serialize};

use super::ReportError;

/// 1-based ranks; tied values share the mean of their rank span.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && xs[order[j]] == xs[order[i]] {
            j += 1;
        }
        // positions i..j hold ranks i+1..=j
        let mean = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = mean;
        }
        i = j;
    }
    ranks
}

fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman rank correlation: Pearson correlation of average ranks.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64, ReportError> {
    if xs.len() != ys.len() {
        return Err(ReportError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return Err(ReportError::TooFewValues(xs.len()));
    }
    if xs.iter().chain(ys).any(|v| v.is_nan()) {
        return Err(ReportError::NotANumber);
    }
    pearson(&average_ranks(xs), &average_ranks(ys)).ok_or(ReportError::ConstantInput)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub item_id: String,
    pub annotator_id: String,
    pub label: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationSet {
    items: Vec<Annotation>,
}

impl AnnotationSet {
    pub fn new(items: Vec<Annotation>) -> Result<Self, ReportError> {
        let mut seen = BTreeSet::new();
        for a in &items {
            if !seen.insert((a.item_id.as_str(), a.annotator_id.as_str())) {
                return Err(ReportError::DuplicateAnnotation {
                    item_id: a.item_id.clone(),
                    annotator_id: a.annotator_id.clone(),
                });
            }
        }
        Ok(Self { items })
    }

    /// Reads `item_id,annotator_id,label` rows with a header line.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self, ReportError> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let items = rdr
            .deserialize()
            .collect::<Result<Vec<Annotation>, _>>()
            .map_err(|e| ReportError::Csv(e.to_string()))?;
        Self::new(items)
    }

    pub fn items(&self) -> &[Annotation] {
        &self.items
    }
}

/// Krippendorff's alpha for nominal labels via the coincidence matrix.
/// Items with fewer than two labels are not pairable and are ignored.
pub fn krippendorff_alpha(set: &AnnotationSet) -> Result<f64, ReportError> {
    let mut units: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for a in set.items() {
        units.entry(&a.item_id).or_default().push(&a.label);
    }
    let mut coincidence: BTreeMap<(&str, &str), f64> = BTreeMap::new();
    for labels in units.values().filter(|l| l.len() >= 2) {
        let w = 1.0 / (labels.len() - 1) as f64;
        for (i, c) in labels.iter().enumerate() {
            for (j, k) in labels.iter().enumerate() {
                if i != j {
                    *coincidence.entry((c, k)).or_default() += w;
                }
            }
        }
    }
    if coincidence.is_empty() {
        return Err(ReportError::NoPairableValues);
    }
    let mut marginals: BTreeMap<&str, f64> = BTreeMap::new();
    for (&(c, _), &o) in &coincidence {
        *marginals.entry(c).or_default() += o;
    }
    let n: f64 = marginals.values().sum();
    let observed: f64 = coincidence
        .iter()
        .filter(|((c, k), _)| c != k)
        .map(|(_, o)| o)
        .sum();
    let mut expected = 0.0;
    for (c, nc) in &marginals {
        for (k, nk) in &marginals {
            if c != k {
                expected += nc * nk;
            }
        }
    }
    if expected == 0.0 {
        return Err(ReportError::SingleLabel);
    }
    Ok(1.0 - (n - 1.0) * observed / expected)
}
