//! Loss and orientation-assignment math for joint classification over `m`
//! candidate views with an extra "incorrect view" class `n + 1`.
//!
//! Classes and orientations are 1-based at this API, matching how labels are
//! written everywhere else in the toolkit.

use thiserror::Error;

/// Lower clamp applied to probabilities before taking logs.
pub const LOG_EPSILON: f64 = 1e-12;

const ROW_SUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum RotnetError {
    #[error("class {class} outside [1, {n}]")]
    ClassOutOfRange { class: usize, n: usize },
    #[error("orientation {orientation} outside [1, {m}]")]
    OrientationOutOfRange { orientation: usize, m: usize },
    #[error("expected {expected} views, got {got}")]
    ViewCountMismatch { expected: usize, got: usize },
    #[error("probabilities must lie in [0, 1]; found {0}")]
    NotAProbability(f64),
    #[error("row {row} sums to {sum}, expected 1")]
    RowSum { row: usize, sum: f64 },
    #[error("tensor of {len} values does not fit shape {m} x {cols}")]
    BadShape { len: usize, m: usize, cols: usize },
}

fn clamped_ln(p: f64) -> f64 {
    p.max(LOG_EPSILON).ln()
}

/// Cross entropy against a one-hot target: `-ln probs[class]`.
pub fn onehot_ce(probs: &[f64], class: usize) -> Result<f64, RotnetError> {
    if class == 0 || class > probs.len() {
        return Err(RotnetError::ClassOutOfRange { class, n: probs.len() });
    }
    check_row(probs, 0)?;
    Ok(-clamped_ln(probs[class - 1]))
}

fn check_row(row: &[f64], index: usize) -> Result<(), RotnetError> {
    if let Some(&bad) = row.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(RotnetError::NotAProbability(bad));
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
        return Err(RotnetError::RowSum { row: index, sum });
    }
    Ok(())
}

/// Softmax outputs for one input: `m` rows (candidate orientations) of `n + 1`
/// class probabilities, the last column being "incorrect view".
#[derive(Debug, Clone, PartialEq)]
pub struct ClassProbs {
    m: usize,
    n: usize,
    values: Vec<f64>,
}

impl ClassProbs {
    pub fn new(m: usize, n: usize, values: Vec<f64>) -> Result<Self, RotnetError> {
        if m == 0 || n == 0 || values.len() != m * (n + 1) {
            return Err(RotnetError::BadShape { len: values.len(), m, cols: n + 1 });
        }
        for (row, chunk) in values.chunks(n + 1).enumerate() {
            check_row(chunk, row)?;
        }
        Ok(Self { m, n, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, RotnetError> {
        let m = rows.len();
        let cols = rows.first().map_or(0, Vec::len);
        if cols < 2 || rows.iter().any(|r| r.len() != cols) {
            return Err(RotnetError::BadShape { len: rows.iter().map(Vec::len).sum(), m, cols });
        }
        Self::new(m, cols - 1, rows.concat())
    }

    /// Every entry equal to `1 / (n + 1)`.
    pub fn uniform(m: usize, n: usize) -> Self {
        Self { m, n, values: vec![1.0 / (n + 1) as f64; m * (n + 1)] }
    }

    pub fn views(&self) -> usize {
        self.m
    }

    pub fn classes(&self) -> usize {
        self.n
    }

    /// Probability of class `k` (1-based, `n + 1` allowed) for orientation `j` (1-based).
    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.values[(j - 1) * (self.n + 1) + (k - 1)]
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.values[(j - 1) * (self.n + 1)..j * (self.n + 1)]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn check_indices(&self, orientation: usize, class: usize) -> Result<(), RotnetError> {
        if orientation == 0 || orientation > self.m {
            return Err(RotnetError::OrientationOutOfRange { orientation, m: self.m });
        }
        if class == 0 || class > self.n {
            return Err(RotnetError::ClassOutOfRange { class, n: self.n });
        }
        Ok(())
    }

    /// `ln y[j, class] - ln y[j, n + 1]`, both clamped.
    fn log_ratio(&self, j: usize, class: usize) -> f64 {
        clamped_ln(self.get(j, class)) - clamped_ln(self.get(j, self.n + 1))
    }
}

/// Target distribution for a view assigned to `orientation` with true `class`:
/// row `orientation` is one-hot on `class`, every other row is one-hot on `n + 1`.
pub fn rotnet_target(orientation: usize, class: usize, m: usize, n: usize) -> Result<ClassProbs, RotnetError> {
    if orientation == 0 || orientation > m {
        return Err(RotnetError::OrientationOutOfRange { orientation, m });
    }
    if class == 0 || class > n {
        return Err(RotnetError::ClassOutOfRange { class, n });
    }
    let mut values = vec![0.0; m * (n + 1)];
    for j in 1..=m {
        let k = if j == orientation { class } else { n + 1 };
        values[(j - 1) * (n + 1) + (k - 1)] = 1.0;
    }
    Ok(ClassProbs { m, n, values })
}

/// `-ln y[o, c] - Σ_{j ≠ o} ln y[j, n + 1]`.
pub fn rotnet_view_loss(y: &ClassProbs, orientation: usize, class: usize) -> Result<f64, RotnetError> {
    y.check_indices(orientation, class)?;
    let mut loss = -clamped_ln(y.get(orientation, class));
    for j in (1..=y.m).filter(|&j| j != orientation) {
        loss -= clamped_ln(y.get(j, y.n + 1));
    }
    Ok(loss)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AssignmentMode {
    /// Orientations are a cyclic shift of `1..=m`.
    #[default]
    Cyclic,
    /// Each view picks its orientation on its own.
    Independent,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrientationAssignment {
    /// 1-based orientation of each view.
    pub orientations: Vec<usize>,
    pub mode: AssignmentMode,
}

impl OrientationAssignment {
    /// View `i` (0-based) gets orientation `(i + shift) mod m + 1`.
    pub fn cyclic(m: usize, shift: usize) -> Self {
        Self { orientations: (0..m).map(|i| (i + shift) % m + 1).collect(), mode: AssignmentMode::Cyclic }
    }

    /// The shift when the orientations form a cyclic sequence.
    pub fn shift(&self) -> Option<usize> {
        let m = self.orientations.len();
        let first = *self.orientations.first()?;
        let shift = first - 1;
        (self.orientations == Self::cyclic(m, shift).orientations).then_some(shift)
    }
}

/// Sum of per-view losses under `assignment`.
pub fn rotnet_total_loss(
    ys: &[ClassProbs],
    assignment: &OrientationAssignment,
    class: usize,
) -> Result<f64, RotnetError> {
    if ys.len() != assignment.orientations.len() {
        return Err(RotnetError::ViewCountMismatch { expected: assignment.orientations.len(), got: ys.len() });
    }
    ys.iter()
        .zip(&assignment.orientations)
        .map(|(y, &o)| rotnet_view_loss(y, o, class))
        .sum()
}

fn check_views(ys: &[ClassProbs]) -> Result<(usize, usize), RotnetError> {
    let m = ys.len();
    let n = ys.first().map_or(0, |y| y.n);
    for y in ys {
        if y.m != m {
            return Err(RotnetError::ViewCountMismatch { expected: m, got: y.m });
        }
        if y.n != n {
            return Err(RotnetError::BadShape { len: y.values.len(), m: y.m, cols: n + 1 });
        }
    }
    Ok((m, n))
}

/// Assignment maximizing `Σ ln(y[o_i, c] / y[o_i, n + 1])`, paired with that
/// log score. Maximizing this product of ratios is equivalent to minimizing
/// [`rotnet_total_loss`] over the candidate set. Ties go to the smallest shift
/// (cyclic) or smallest orientation (independent).
pub fn best_assignment_scored(
    ys: &[ClassProbs],
    class: usize,
    mode: AssignmentMode,
) -> Result<(OrientationAssignment, f64), RotnetError> {
    let (m, n) = check_views(ys)?;
    if m == 0 {
        return Ok((OrientationAssignment { orientations: Vec::new(), mode }, 0.0));
    }
    if class == 0 || class > n {
        return Err(RotnetError::ClassOutOfRange { class, n });
    }
    match mode {
        AssignmentMode::Cyclic => {
            let mut best = (0, f64::NEG_INFINITY);
            for shift in 0..m {
                let score: f64 = ys
                    .iter()
                    .enumerate()
                    .map(|(i, y)| y.log_ratio((i + shift) % m + 1, class))
                    .sum();
                if score > best.1 {
                    best = (shift, score);
                }
            }
            Ok((OrientationAssignment::cyclic(m, best.0), best.1))
        }
        AssignmentMode::Independent => {
            let mut orientations = Vec::with_capacity(m);
            let mut total = 0.0;
            for y in ys {
                let mut best = (1, f64::NEG_INFINITY);
                for j in 1..=m {
                    let r = y.log_ratio(j, class);
                    if r > best.1 {
                        best = (j, r);
                    }
                }
                orientations.push(best.0);
                total += best.1;
            }
            Ok((OrientationAssignment { orientations, mode }, total))
        }
    }
}

pub fn best_assignment(
    ys: &[ClassProbs],
    class: usize,
    mode: AssignmentMode,
) -> Result<OrientationAssignment, RotnetError> {
    best_assignment_scored(ys, class, mode).map(|(a, _)| a)
}

/// Class whose best assignment scores highest; ties go to the smaller class.
pub fn predict_class(
    ys: &[ClassProbs],
    mode: AssignmentMode,
) -> Result<(usize, OrientationAssignment), RotnetError> {
    let (_, n) = check_views(ys)?;
    if n == 0 {
        return Err(RotnetError::ClassOutOfRange { class: 1, n });
    }
    let mut best: Option<(usize, OrientationAssignment, f64)> = None;
    for class in 1..=n {
        let (assignment, score) = best_assignment_scored(ys, class, mode)?;
        if best.as_ref().is_none_or(|b| score > b.2) {
            best = Some((class, assignment, score));
        }
    }
    let (class, assignment, _) = best.expect("n >= 1");
    Ok((class, assignment))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn onehot_examples() {
        assert!(close(onehot_ce(&[0.5, 0.5], 1).unwrap(), 2f64.ln(), 1e-15));
        assert_eq!(onehot_ce(&[1.0, 0.0], 1).unwrap(), 0.0);
        assert!(close(onehot_ce(&[0.25, 0.75], 2).unwrap(), -(0.75f64.ln()), 1e-15));
        assert!(close(onehot_ce(&[1.0, 0.0], 2).unwrap(), -(1e-12f64.ln()), 1e-12));
        assert_eq!(onehot_ce(&[0.5, 0.5], 3), Err(RotnetError::ClassOutOfRange { class: 3, n: 2 }));
        assert_eq!(onehot_ce(&[0.5, 0.5], 0), Err(RotnetError::ClassOutOfRange { class: 0, n: 2 }));
        assert!(matches!(onehot_ce(&[0.5, 0.6], 1), Err(RotnetError::RowSum { .. })));
    }

    #[test]
    fn target_examples() {
        let t = rotnet_target(1, 1, 2, 1).unwrap();
        assert_eq!(t.values(), &[1.0, 0.0, 0.0, 1.0]);
        let t = rotnet_target(2, 1, 3, 2).unwrap();
        assert_eq!(t.row(1), &[0.0, 0.0, 1.0]);
        assert_eq!(t.row(2), &[1.0, 0.0, 0.0]);
        assert_eq!(t.row(3), &[0.0, 0.0, 1.0]);
        assert!(rotnet_target(4, 1, 3, 2).is_err());
        assert!(rotnet_target(1, 3, 3, 2).is_err());
    }

    #[test]
    fn view_loss_examples() {
        let y = ClassProbs::from_rows(&[vec![0.8, 0.2], vec![0.3, 0.7]]).unwrap();
        let want = -(0.8f64.ln()) - 0.7f64.ln();
        assert!(close(rotnet_view_loss(&y, 1, 1).unwrap(), want, 1e-15));
        assert!(close(want, 0.5798, 1e-4));

        let t = rotnet_target(2, 3, 4, 5).unwrap();
        assert_eq!(rotnet_view_loss(&t, 2, 3).unwrap(), 0.0);

        let u = ClassProbs::uniform(4, 3);
        assert!(close(rotnet_view_loss(&u, 3, 2).unwrap(), 4.0 * 4f64.ln(), 1e-12));
        assert!(rotnet_view_loss(&u, 5, 1).is_err());
        assert!(rotnet_view_loss(&u, 1, 4).is_err());
    }

    #[test]
    fn total_loss_examples() {
        let ys = vec![ClassProbs::uniform(12, 40); 12];
        let loss = rotnet_total_loss(&ys, &OrientationAssignment::cyclic(12, 0), 7).unwrap();
        let want = 144.0 * 41f64.ln();
        assert!(close(loss, want, 1e-9 * want));
        assert!(close(loss, 534.76, 0.01));

        let a = ClassProbs::from_rows(&[vec![0.8, 0.2], vec![0.3, 0.7]]).unwrap();
        let b = ClassProbs::from_rows(&[vec![0.6, 0.4], vec![0.1, 0.9]]).unwrap();
        let assignment = OrientationAssignment { orientations: vec![1, 2], mode: AssignmentMode::Cyclic };
        let sum = rotnet_view_loss(&a, 1, 1).unwrap() + rotnet_view_loss(&b, 2, 1).unwrap();
        assert!(close(rotnet_total_loss(&[a.clone(), b], &assignment, 1).unwrap(), sum, 1e-15));
        assert!(matches!(
            rotnet_total_loss(&[a], &assignment, 1),
            Err(RotnetError::ViewCountMismatch { .. })
        ));
    }

    fn worked_pair() -> Vec<ClassProbs> {
        vec![
            ClassProbs::from_rows(&[vec![0.7, 0.3], vec![0.1, 0.9]]).unwrap(),
            ClassProbs::from_rows(&[vec![0.2, 0.8], vec![0.6, 0.4]]).unwrap(),
        ]
    }

    #[test]
    fn best_assignment_worked_example() {
        let ys = worked_pair();
        let (a, score) = best_assignment_scored(&ys, 1, AssignmentMode::Cyclic).unwrap();
        assert_eq!(a.orientations, vec![1, 2]);
        assert!(close(score.exp(), 3.5, 1e-12));
        let other: f64 = (0.1f64 / 0.9) * (0.2 / 0.8);
        assert!(close(other, 0.0278, 1e-4));
    }

    #[test]
    fn best_assignment_recovers_planted_shift() {
        let (m, n, class) = (5, 3, 2);
        for shift in 0..m {
            let planted = OrientationAssignment::cyclic(m, shift);
            let ys: Vec<ClassProbs> = planted
                .orientations
                .iter()
                .map(|&o| rotnet_target(o, class, m, n).unwrap())
                .collect();
            let a = best_assignment(&ys, class, AssignmentMode::Cyclic).unwrap();
            assert_eq!(a.shift(), Some(shift));
            assert_eq!(rotnet_total_loss(&ys, &a, class).unwrap(), 0.0);
            let ind = best_assignment(&ys, class, AssignmentMode::Independent).unwrap();
            assert_eq!(ind.orientations, planted.orientations);
        }
    }

    #[test]
    fn ties_pick_smallest() {
        let ys = vec![ClassProbs::uniform(3, 2); 3];
        let a = best_assignment(&ys, 1, AssignmentMode::Cyclic).unwrap();
        assert_eq!(a.shift(), Some(0));
        let a = best_assignment(&ys, 1, AssignmentMode::Independent).unwrap();
        assert_eq!(a.orientations, vec![1, 1, 1]);
        assert_eq!(a.shift(), None);
    }

    #[test]
    fn predict_examples() {
        let (m, n) = (4, 5);
        let planted = OrientationAssignment::cyclic(m, 2);
        let ys: Vec<ClassProbs> =
            planted.orientations.iter().map(|&o| rotnet_target(o, 3, m, n).unwrap()).collect();
        let (class, a) = predict_class(&ys, AssignmentMode::Cyclic).unwrap();
        assert_eq!((class, a.shift()), (3, Some(2)));

        let single = vec![ClassProbs::from_rows(&[vec![0.1, 0.6, 0.3]]).unwrap()];
        assert_eq!(predict_class(&single, AssignmentMode::Cyclic).unwrap().0, 2);

        let uniform = vec![ClassProbs::uniform(3, 4); 3];
        assert_eq!(predict_class(&uniform, AssignmentMode::Cyclic).unwrap().0, 1);
    }

    #[test]
    fn class_probs_validation() {
        assert!(matches!(ClassProbs::new(2, 1, vec![0.5; 3]), Err(RotnetError::BadShape { .. })));
        assert!(matches!(ClassProbs::new(1, 1, vec![1.5, -0.5]), Err(RotnetError::NotAProbability(_))));
        assert!(matches!(ClassProbs::new(1, 2, vec![0.2, 0.2, 0.2]), Err(RotnetError::RowSum { .. })));
        assert!(ClassProbs::from_rows(&[vec![0.5, 0.5], vec![1.0]]).is_err());
    }
}
