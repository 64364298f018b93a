use crate::error::{Error, Result};
use crate::nn::{LossKind, Model};
use crate::stream::{to_batch, Sample};

/// A signed permutation of feature indices: `out[i] = sign[i] * x[perm[i]]`.
/// Flips, quarter-turn rotations and sign changes are all of this form, which
/// makes composition and inverses exact.
#[derive(Clone, Debug)]
pub struct GroupElement {
    name: String,
    perm: Vec<usize>,
    sign: Vec<f64>,
}

impl PartialEq for GroupElement {
    fn eq(&self, other: &Self) -> bool {
        self.perm == other.perm && self.sign == other.sign
    }
}

impl GroupElement {
    pub fn new(name: impl Into<String>, perm: Vec<usize>, sign: Vec<f64>) -> Result<Self> {
        let n = perm.len();
        let mut hit = vec![false; n];
        for &p in &perm {
            if p >= n || std::mem::replace(&mut hit[p], true) {
                return Err(Error::contract(format!("{perm:?} is not a permutation")));
            }
        }
        if sign.len() != n || sign.iter().any(|&s| s != 1.0 && s != -1.0) {
            return Err(Error::contract("signs must be +1 or -1, one per index"));
        }
        Ok(GroupElement {
            name: name.into(),
            perm,
            sign,
        })
    }

    pub fn identity(n: usize) -> Self {
        GroupElement {
            name: "identity".into(),
            perm: (0..n).collect(),
            sign: vec![1.0; n],
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    pub fn is_identity(&self) -> bool {
        self.perm.iter().enumerate().all(|(i, &p)| i == p) && self.sign.iter().all(|&s| s == 1.0)
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.perm.iter().zip(&self.sign).map(|(&p, &s)| s * x[p]).collect()
    }

    pub fn apply_sample(&self, s: &Sample) -> Sample {
        Sample {
            features: self.apply(&s.features),
            ..s.clone()
        }
    }

    /// `self` after `other`.
    pub fn compose(&self, other: &GroupElement) -> GroupElement {
        let perm = self.perm.iter().map(|&p| other.perm[p]).collect();
        let sign = self
            .sign
            .iter()
            .zip(&self.perm)
            .map(|(&s, &p)| s * other.sign[p])
            .collect();
        GroupElement {
            name: format!("{}*{}", self.name, other.name),
            perm,
            sign,
        }
    }
}

/// A finite transform group with the uniform distribution over its elements.
#[derive(Clone, Debug)]
pub struct FiniteGroup {
    elements: Vec<GroupElement>,
}

impl FiniteGroup {
    /// Validates identity, closure and inverses.
    pub fn new(elements: Vec<GroupElement>) -> Result<Self> {
        let group = FiniteGroup { elements };
        group.composition_table()?;
        if !group.elements.iter().any(GroupElement::is_identity) {
            return Err(Error::contract("group has no identity element"));
        }
        for (i, a) in group.elements.iter().enumerate() {
            if !group.elements.iter().any(|b| a.compose(b).is_identity()) {
                return Err(Error::contract(format!("element {i} ({}) has no inverse", a.name)));
            }
        }
        Ok(group)
    }

    pub fn trivial(n: usize) -> Self {
        FiniteGroup {
            elements: vec![GroupElement::identity(n)],
        }
    }

    /// `{identity, horizontal flip}` on a `rows x cols` image.
    pub fn horizontal_flips(rows: usize, cols: usize) -> Self {
        let perm = (0..rows * cols)
            .map(|i| (i / cols) * cols + cols - 1 - i % cols)
            .collect();
        let flip = GroupElement {
            name: "hflip".into(),
            perm,
            sign: vec![1.0; rows * cols],
        };
        FiniteGroup::new(vec![GroupElement::identity(rows * cols), flip]).expect("flip group is valid")
    }

    /// The four quarter-turn rotations of a square `side x side` image.
    pub fn rotations(side: usize) -> Self {
        let n = side * side;
        // clockwise quarter turn: out[r][c] = in[side-1-c][r]
        let quarter = GroupElement {
            name: "rot90".into(),
            perm: (0..n)
                .map(|i| {
                    let (r, c) = (i / side, i % side);
                    (side - 1 - c) * side + r
                })
                .collect(),
            sign: vec![1.0; n],
        };
        let mut elements = vec![GroupElement::identity(n)];
        for k in 1..4 {
            let mut e = quarter.compose(&elements[k - 1]);
            e.name = format!("rot{}", 90 * k);
            elements.push(e);
        }
        FiniteGroup::new(elements).expect("rotation group is valid")
    }

    /// `{x, -x}` on vectors of length `n`.
    pub fn sign_flips(n: usize) -> Self {
        let neg = GroupElement {
            name: "negate".into(),
            perm: (0..n).collect(),
            sign: vec![-1.0; n],
        };
        FiniteGroup::new(vec![GroupElement::identity(n), neg]).expect("sign group is valid")
    }

    pub fn elements(&self) -> &[GroupElement] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.elements.first().map_or(0, GroupElement::dim)
    }

    /// `table[i][j]` is the index of `elements[i] * elements[j]`; errors if a
    /// product falls outside the set.
    pub fn composition_table(&self) -> Result<Vec<Vec<usize>>> {
        if self.elements.is_empty() {
            return Err(Error::contract("empty group"));
        }
        let n = self.dim();
        if self.elements.iter().any(|e| e.dim() != n) {
            return Err(Error::contract("group elements act on different dimensions"));
        }
        self.elements
            .iter()
            .map(|a| {
                self.elements
                    .iter()
                    .map(|b| {
                        let ab = a.compose(b);
                        self.elements
                            .iter()
                            .position(|e| *e == ab)
                            .ok_or_else(|| Error::contract(format!("{} * {} is not in the group", a.name, b.name)))
                    })
                    .collect()
            })
            .collect()
    }

    /// The orbit `{g x : g in G}` of every sample, grouped by sample.
    pub fn orbit(&self, samples: &[Sample]) -> Vec<Sample> {
        samples
            .iter()
            .flat_map(|s| self.elements.iter().map(move |g| g.apply_sample(s)))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OrbitLosses {
    /// One loss per group element, in element order.
    pub losses: Vec<f64>,
    pub mean: f64,
}

/// Loss of `sample` under every group element, and their uniform average.
pub fn group_orbit_losses(model: &Model, sample: &Sample, group: &FiniteGroup, kind: LossKind) -> Result<OrbitLosses> {
    if sample.features.len() != group.dim() {
        return Err(Error::contract(format!(
            "group acts on {} features, sample has {}",
            group.dim(),
            sample.features.len()
        )));
    }
    let batch = to_batch(&group.orbit(std::slice::from_ref(sample)))?;
    let losses = model.per_sample_losses(&batch, kind)?;
    let mean = losses.iter().sum::<f64>() / losses.len() as f64;
    Ok(OrbitLosses { losses, mean })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, MlpSpec};
    use crate::stream::FeatureShape;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn img_sample(values: Vec<f64>, side: usize) -> Sample {
        Sample::new(0, values, FeatureShape::Image { rows: side, cols: side }, 1, 0)
    }

    #[test]
    fn tables_close() {
        for g in [
            FiniteGroup::horizontal_flips(3, 4),
            FiniteGroup::rotations(4),
            FiniteGroup::sign_flips(5),
            FiniteGroup::trivial(2),
        ] {
            let table = g.composition_table().unwrap();
            assert_eq!(table.len(), g.len());
            // each row is a permutation of the elements (Latin square)
            for row in &table {
                let mut r = row.clone();
                r.sort_unstable();
                assert_eq!(r, (0..g.len()).collect::<Vec<_>>());
            }
        }
    }

    #[test]
    fn rotation_four_times_is_identity() {
        let g = FiniteGroup::rotations(3);
        let r = &g.elements()[1];
        let x: Vec<f64> = (0..9).map(f64::from).collect();
        let once = r.apply(&x);
        // clockwise: top row of the result is the left column reversed
        assert_eq!(&once[..3], &[6.0, 3.0, 0.0]);
        let four = r.apply(&r.apply(&r.apply(&once)));
        assert_eq!(four, x);
    }

    #[test]
    fn non_closed_set_rejected() {
        let quarter = FiniteGroup::rotations(3).elements()[1].clone();
        assert!(FiniteGroup::new(vec![GroupElement::identity(9), quarter]).is_err());
        let flip = FiniteGroup::horizontal_flips(2, 2).elements()[1].clone();
        assert!(FiniteGroup::new(vec![flip]).is_err());
    }

    fn model(seed: u64, d: usize) -> Model {
        Model::init(
            MlpSpec::new(vec![d, 5, 3], Activation::Tanh).unwrap(),
            &mut ChaCha8Rng::seed_from_u64(seed),
        )
    }

    #[test]
    fn trivial_group_gives_plain_loss() {
        let m = model(0, 4);
        let s = img_sample(vec![0.1, 0.5, 0.2, 0.9], 2);
        let orbit = group_orbit_losses(&m, &s, &FiniteGroup::trivial(4), LossKind::CrossEntropy).unwrap();
        let plain = m.loss(&to_batch(&[s]).unwrap(), LossKind::CrossEntropy).unwrap();
        assert_eq!(orbit.losses, vec![plain]);
        assert_eq!(orbit.mean, plain);
    }

    #[test]
    fn symmetric_input_has_equal_flip_losses() {
        let m = model(1, 6);
        // rows [a b a] are left-right symmetric
        let s = Sample::new(
            0,
            vec![0.2, 0.7, 0.2, 0.9, 0.1, 0.9],
            FeatureShape::Image { rows: 2, cols: 3 },
            1,
            0,
        );
        let orbit = group_orbit_losses(&m, &s, &FiniteGroup::horizontal_flips(2, 3), LossKind::CrossEntropy).unwrap();
        assert_eq!(orbit.losses[0], orbit.losses[1]);
        assert_eq!(orbit.mean, orbit.losses[0]);
    }

    #[test]
    fn rotation_mean_matches_direct_enumeration() {
        let m = model(2, 16);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f64> = (0..16).map(|_| rng.random::<f64>()).collect();
        let s = img_sample(x.clone(), 4);
        let orbit = group_orbit_losses(&m, &s, &FiniteGroup::rotations(4), LossKind::CrossEntropy).unwrap();

        // rotate by explicit index arithmetic, independent of GroupElement
        let mut direct = Vec::new();
        let mut cur = x;
        for _ in 0..4 {
            let batch = to_batch(&[img_sample(cur.clone(), 4)]).unwrap();
            direct.push(m.loss(&batch, LossKind::CrossEntropy).unwrap());
            let mut next = vec![0.0; 16];
            for r in 0..4 {
                for c in 0..4 {
                    next[r * 4 + c] = cur[(3 - c) * 4 + r];
                }
            }
            cur = next;
        }
        let direct_mean = direct.iter().sum::<f64>() / 4.0;
        assert!((orbit.mean - direct_mean).abs() < 1e-14);
        for (a, b) in orbit.losses.iter().zip(&direct) {
            assert!((a - b).abs() < 1e-14);
        }
    }
}
