use super::{DatasetManifest, DiagnosisGrade};
use crate::error::{Error, Result};
use crate::tensor::Rng;

/// RNG stream reserved for the train/validation split.
pub const SPLIT_STREAM: u64 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct SplitSpec {
    pub validation_fraction: f64,
    pub seed: u64,
    pub stratified: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self { validation_fraction: 0.2, seed: 0, stratified: true }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let f = self.validation_fraction;
        if !(f > 0.0 && f < 1.0) {
            return Err(Error::Config(format!("validation fraction must lie in (0, 1), got {f}")));
        }
        Ok(())
    }
}

/// Validation share of a group of `n`: `round(n * f)`, kept within
/// `[1, n - 1]` whenever `n >= 2` so both sides see the group.
fn validation_count(n: usize, f: f64) -> usize {
    let k = (n as f64 * f).round() as usize;
    if n >= 2 {
        k.clamp(1, n - 1)
    } else {
        0
    }
}

/// Partitions manifest ids into `(train, validation)`, each listed in
/// manifest order. With stratification every grade is split separately.
pub fn split(m: &DatasetManifest, spec: &SplitSpec) -> Result<(Vec<String>, Vec<String>)> {
    spec.validate()?;
    if m.is_empty() {
        return Err(Error::Data("cannot split an empty manifest".into()));
    }
    let mut rng = Rng::with_stream(spec.seed, SPLIT_STREAM);
    let mut is_val = vec![false; m.len()];
    let groups: Vec<Vec<usize>> = if spec.stratified {
        DiagnosisGrade::all()
            .map(|g| {
                let idx: Vec<usize> = (0..m.len()).filter(|&i| m.entries[i].grade == g).collect();
                if idx.is_empty() {
                    Err(Error::Data(format!(
                        "stratified split needs every grade; grade {g} ({}) has no samples",
                        g.name()
                    )))
                } else {
                    Ok(idx)
                }
            })
            .collect::<Result<_>>()?
    } else {
        vec![(0..m.len()).collect()]
    };
    for mut group in groups {
        let k = validation_count(group.len(), spec.validation_fraction);
        rng.shuffle(&mut group);
        for &i in &group[..k] {
            is_val[i] = true;
        }
    }
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for (e, v) in m.entries.iter().zip(is_val) {
        if v { &mut val } else { &mut train }.push(e.id.clone());
    }
    Ok((train, val))
}
