//! Social grouping: pairwise social relevance, Weibull spatial confidence and
//! connected components of the thresholded confidence graph.

use serde::{Deserialize, Serialize};

use crate::error::SocialError;
use crate::scenario::{ParamSet, PersonState};

/// Half-wave rectified cosine.
fn rectified(cos: f64) -> f64 {
    if cos > 0.0 {
        cos
    } else {
        0.0
    }
}

/// The heading-dependent factor `(psi(cos A) + c)(psi(cos B) + c) / |d|^2`
/// that feeds the Weibull map. The interaction intensity is normalized to 1.
pub fn social_relevance(a: &PersonState, b: &PersonState, params: &ParamSet) -> Result<f64, SocialError> {
    let delta = b.position() - a.position();
    let dist_sq = delta.norm_sq();
    if dist_sq == 0.0 {
        return Err(SocialError::CoincidentPersons { a: a.id, b: b.id });
    }
    let dist = dist_sq.sqrt();
    let cos_a = a.heading().dot(delta) / dist;
    let cos_b = b.heading().dot(-delta) / dist;
    Ok((rectified(cos_a) + params.c) * (rectified(cos_b) + params.c) / dist_sq)
}

/// Weibull confidence `1 - exp(-a * sr^b)`; zero for `sr == 0`.
pub fn spatial_confidence(sr: f64, params: &ParamSet) -> f64 {
    debug_assert!(sr >= 0.0);
    1.0 - (-params.a * sr.powf(params.b)).exp()
}

/// Symmetric matrix of pairwise spatial confidences, zero diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceMatrix {
    n: usize,
    eta: Vec<f64>,
}

impl ConfidenceMatrix {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.eta[i * self.n + j]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.eta.chunks(self.n.max(1))
    }
}

pub fn confidence_matrix(persons: &[PersonState], params: &ParamSet) -> Result<ConfidenceMatrix, SocialError> {
    let n = persons.len();
    let mut eta = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let sr = social_relevance(&persons[i], &persons[j], params)?;
            let v = spatial_confidence(sr, params);
            eta[i * n + j] = v;
            eta[j * n + i] = v;
        }
    }
    Ok(ConfidenceMatrix { n, eta })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupKind {
    Static,
    Dynamic,
}

/// A social group; `members` index into the person list it was built from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Group {
    pub members: Vec<usize>,
    pub kind: GroupKind,
}

impl Group {
    pub fn new(members: Vec<usize>) -> Self {
        Self {
            members,
            kind: GroupKind::Static,
        }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Sorted person ids of the members.
    pub fn member_ids(&self, persons: &[PersonState]) -> Vec<u32> {
        let mut ids: Vec<u32> = self.members.iter().map(|&i| persons[i].id).collect();
        ids.sort_unstable();
        ids
    }

    pub fn persons<'a>(&'a self, persons: &'a [PersonState]) -> impl Iterator<Item = &'a PersonState> {
        self.members.iter().map(move |&i| &persons[i])
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GroupSet {
    pub groups: Vec<Group>,
}

impl GroupSet {
    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Group> {
        self.groups.iter()
    }

    /// The partition as sorted id sets, independent of person ordering.
    pub fn id_partition(&self, persons: &[PersonState]) -> Vec<Vec<u32>> {
        let mut parts: Vec<Vec<u32>> = self.groups.iter().map(|g| g.member_ids(persons)).collect();
        parts.sort();
        parts
    }
}

/// Connected components of the graph with an edge wherever confidence
/// reaches `a_thres`. Groups come out ordered by their lowest member index.
///
/// `t` decides the static/dynamic kind from the members' scripts.
pub fn cluster_groups(h: &ConfidenceMatrix, persons: &[PersonState], params: &ParamSet, t: f64) -> GroupSet {
    let n = h.len();
    debug_assert_eq!(n, persons.len());
    let mut component = vec![usize::MAX; n];
    let mut groups = Vec::new();
    for root in 0..n {
        if component[root] != usize::MAX {
            continue;
        }
        let id = groups.len();
        let mut members = Vec::new();
        let mut stack = vec![root];
        component[root] = id;
        while let Some(v) = stack.pop() {
            members.push(v);
            for u in 0..n {
                if u != v && component[u] == usize::MAX && h.get(v, u) >= params.a_thres {
                    component[u] = id;
                    stack.push(u);
                }
            }
        }
        members.sort_unstable();
        let kind = if members.iter().any(|&i| persons[i].is_moving_at(t)) {
            GroupKind::Dynamic
        } else {
            GroupKind::Static
        };
        groups.push(Group { members, kind });
    }
    GroupSet { groups }
}

/// Confidence matrix and grouping in one call.
pub fn group_persons(
    persons: &[PersonState],
    params: &ParamSet,
    t: f64,
) -> Result<(ConfidenceMatrix, GroupSet), SocialError> {
    let h = confidence_matrix(persons, params)?;
    let groups = cluster_groups(&h, persons, params, t);
    Ok((h, groups))
}
