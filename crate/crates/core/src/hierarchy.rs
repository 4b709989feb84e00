//! Role hierarchies: a DAG over one organization's roles where an edge
//! `parent -> child` means the parent inherits the child's permissions.
//!
//! For a role `r` the hierarchy derives
//! * `A_r`, the ancestor set (contains `r` itself),
//! * `D_r`, the descendant set (never contains `r`),
//! * their complements `Ā_r = Ψ \ A_r` and `D̄_r = Ψ \ D_r`,
//!
//! and [`RoleHierarchy::gamma`], the set of roles whose ciphertext components
//! move a ciphertext for `r_i` onto an ancestor role `r_x`.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use crate::error::{Error, Result};

/// A role `r^k_i`: role `name` managed by organization `org`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RoleId {
    org: String,
    name: String,
}

impl RoleId {
    pub fn new(org: impl Into<String>, name: impl Into<String>) -> Self {
        RoleId {
            org: org.into(),
            name: name.into(),
        }
    }

    pub fn org(&self) -> &str {
        &self.org
    }

    pub fn name(&self) -> &str {
        &self.name
    }
}

impl fmt::Display for RoleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.org, self.name)
    }
}

pub type RoleSet = BTreeSet<RoleId>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum HierarchyWarning {
    /// Role managers of a root with at most two children can recover each
    /// other's role parameters.
    FewRootChildren { root: RoleId, children: usize },
}

impl fmt::Display for HierarchyWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HierarchyWarning::FewRootChildren { root, children } => write!(
                f,
                "root role {root} has {children} children; at least three keep role secrets private between role managers"
            ),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RoleHierarchy {
    org: String,
    roles: RoleSet,
    children: BTreeMap<RoleId, RoleSet>,
    ancestors: BTreeMap<RoleId, RoleSet>,
    descendants: BTreeMap<RoleId, RoleSet>,
    warnings: Vec<HierarchyWarning>,
}

/// Builds a hierarchy for `org` and computes the derived sets by transitive
/// closure.
pub fn build_hierarchy<'a, R, E>(org: &str, roles: R, edges: E) -> Result<RoleHierarchy>
where
    R: IntoIterator<Item = &'a str>,
    E: IntoIterator<Item = (&'a str, &'a str)>,
{
    let mut set = RoleSet::new();
    for name in roles {
        if name.is_empty() || name.chars().any(char::is_whitespace) {
            return Err(Error::Decode(format!("invalid role name {name:?}")));
        }
        if !set.insert(RoleId::new(org, name)) {
            return Err(Error::DuplicateRole(name.to_string()));
        }
    }
    let mut children: BTreeMap<RoleId, RoleSet> =
        set.iter().map(|r| (r.clone(), RoleSet::new())).collect();
    let mut parents: BTreeMap<RoleId, usize> = set.iter().map(|r| (r.clone(), 0)).collect();
    for (parent, child) in edges {
        let p = RoleId::new(org, parent);
        let c = RoleId::new(org, child);
        if !set.contains(&p) {
            return Err(Error::UnknownRole(parent.to_string()));
        }
        if !set.contains(&c) {
            return Err(Error::UnknownRole(child.to_string()));
        }
        if p == c {
            return Err(Error::CycleDetected(parent.to_string()));
        }
        if children.get_mut(&p).expect("declared").insert(c.clone()) {
            *parents.get_mut(&c).expect("declared") += 1;
        }
    }

    // Kahn's algorithm; leftovers sit on a cycle.
    let roots: Vec<RoleId> = parents
        .iter()
        .filter(|(_, n)| **n == 0)
        .map(|(r, _)| r.clone())
        .collect();
    let mut indegree = parents;
    let mut queue: VecDeque<RoleId> = roots.iter().cloned().collect();
    let mut order = Vec::with_capacity(set.len());
    while let Some(r) = queue.pop_front() {
        for c in &children[&r] {
            let n = indegree.get_mut(c).expect("declared");
            *n -= 1;
            if *n == 0 {
                queue.push_back(c.clone());
            }
        }
        order.push(r);
    }
    if order.len() != set.len() {
        let stuck = indegree
            .iter()
            .find(|(_, n)| **n > 0)
            .map(|(r, _)| r.name().to_string())
            .unwrap_or_default();
        return Err(Error::CycleDetected(stuck));
    }

    let mut descendants: BTreeMap<RoleId, RoleSet> = BTreeMap::new();
    for r in order.iter().rev() {
        let mut d = RoleSet::new();
        for c in &children[r] {
            d.insert(c.clone());
            d.extend(descendants[c].iter().cloned());
        }
        descendants.insert(r.clone(), d);
    }
    let mut ancestors: BTreeMap<RoleId, RoleSet> = set
        .iter()
        .map(|r| (r.clone(), RoleSet::from([r.clone()])))
        .collect();
    for (r, d) in &descendants {
        for x in d {
            ancestors.get_mut(x).expect("declared").insert(r.clone());
        }
    }

    let mut warnings = Vec::new();
    if set.len() > 1 {
        for root in &roots {
            let n = children[root].len();
            if n < 3 {
                let w = HierarchyWarning::FewRootChildren {
                    root: root.clone(),
                    children: n,
                };
                log::warn!("{w}");
                warnings.push(w);
            }
        }
    }

    Ok(RoleHierarchy {
        org: org.to_string(),
        roles: set,
        children,
        ancestors,
        descendants,
        warnings,
    })
}

impl RoleHierarchy {
    pub fn org(&self) -> &str {
        &self.org
    }

    /// Ψ
    pub fn roles(&self) -> &RoleSet {
        &self.roles
    }

    pub fn len(&self) -> usize {
        self.roles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roles.is_empty()
    }

    pub fn warnings(&self) -> &[HierarchyWarning] {
        &self.warnings
    }

    pub fn contains(&self, r: &RoleId) -> bool {
        self.roles.contains(r)
    }

    /// Looks up a role of this organization by name.
    pub fn role(&self, name: &str) -> Result<RoleId> {
        let r = RoleId::new(self.org.clone(), name);
        if self.roles.contains(&r) {
            Ok(r)
        } else {
            Err(Error::UnknownRole(name.to_string()))
        }
    }

    fn known(&self, r: &RoleId) -> Result<()> {
        if self.roles.contains(r) {
            Ok(())
        } else {
            Err(Error::UnknownRole(r.to_string()))
        }
    }

    pub fn children(&self, r: &RoleId) -> Result<&RoleSet> {
        self.known(r)?;
        Ok(&self.children[r])
    }

    /// Parent-to-child edges in sorted order.
    pub fn edges(&self) -> impl Iterator<Item = (&RoleId, &RoleId)> {
        self.children
            .iter()
            .flat_map(|(p, cs)| cs.iter().map(move |c| (p, c)))
    }

    /// `A_r`, self-inclusive.
    pub fn ancestors(&self, r: &RoleId) -> Result<&RoleSet> {
        self.known(r)?;
        Ok(&self.ancestors[r])
    }

    /// `D_r`, self-exclusive.
    pub fn descendants(&self, r: &RoleId) -> Result<&RoleSet> {
        self.known(r)?;
        Ok(&self.descendants[r])
    }

    /// `Ā_r = Ψ \ A_r`
    pub fn non_ancestors(&self, r: &RoleId) -> Result<RoleSet> {
        let a = self.ancestors(r)?;
        Ok(self.roles.difference(a).cloned().collect())
    }

    /// `D̄_r = Ψ \ D_r`
    pub fn non_descendants(&self, r: &RoleId) -> Result<RoleSet> {
        let d = self.descendants(r)?;
        Ok(self.roles.difference(d).cloned().collect())
    }

    /// True when a holder of `held` may decrypt data encrypted for
    /// `target`, i.e. `held ∈ A_target`.
    pub fn is_ancestor(&self, held: &RoleId, target: &RoleId) -> Result<bool> {
        self.known(held)?;
        Ok(self.ancestors(target)?.contains(held))
    }

    /// `Γ(r_x, r_i) = A_{r_i} \ A_{r_x}`.
    ///
    /// For `r_x ∈ A_{r_i}` this is exactly the set with
    /// `Ā_{r_i} ⊎ Γ(r_x, r_i) = Ā_{r_x}`, which is what decryption needs.
    pub fn gamma(&self, held: &RoleId, target: &RoleId) -> Result<RoleSet> {
        let ax = self.ancestors(held)?;
        let ai = self.ancestors(target)?;
        Ok(ai.difference(ax).cloned().collect())
    }

    /// Line-oriented text form: `role <name>` and `edge <parent> <child>`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for r in &self.roles {
            out.push_str(&format!("role {}\n", r.name()));
        }
        for (p, c) in self.edges() {
            out.push_str(&format!("edge {} {}\n", p.name(), c.name()));
        }
        out
    }

    /// Parses the text form. Records may appear in any order; `#` starts a
    /// comment.
    pub fn parse(org: &str, text: &str) -> Result<RoleHierarchy> {
        let mut roles = Vec::new();
        let mut edges = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            match fields.as_slice() {
                ["role", name] => roles.push(*name),
                ["edge", parent, child] => edges.push((*parent, *child)),
                _ => {
                    return Err(Error::Decode(format!(
                        "hierarchy line {}: unrecognized record {line:?}",
                        n + 1
                    )))
                }
            }
        }
        build_hierarchy(org, roles, edges)
    }
}
