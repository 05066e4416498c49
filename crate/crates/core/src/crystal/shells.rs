use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use super::symmetry::{td_group, SymmetryGroup};
use super::{Coord, LatticeDomain, LatticeSite};

/// Direction family of a shell about the donor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DirectionClass {
    D100,
    D110,
    D111,
    Other,
}

impl DirectionClass {
    pub fn of(rel: Coord) -> DirectionClass {
        let mut a = rel.map(i32::abs);
        a.sort_unstable();
        match a {
            [0, 0, n] if n > 0 => DirectionClass::D100,
            [0, m, n] if m == n && n > 0 => DirectionClass::D110,
            [l, m, n] if l == m && m == n && n > 0 => DirectionClass::D111,
            _ => DirectionClass::Other,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            DirectionClass::D100 => "100",
            DirectionClass::D110 => "110",
            DirectionClass::D111 => "111",
            DirectionClass::Other => "other",
        }
    }
}

/// Lattice sites equivalent under Td at one distance from the donor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShellOrbit {
    pub representative: LatticeSite,
    pub members: Vec<LatticeSite>,
    pub distance_nm: f64,
    /// |r|² in (a₀/4)² units.
    pub squared_radius: i32,
    pub direction_class: DirectionClass,
}

impl ShellOrbit {
    pub fn multiplicity(&self) -> usize {
        self.members.len()
    }

    pub fn contains_relative(&self, domain: &LatticeDomain, rel: Coord) -> bool {
        self.members.iter().any(|m| domain.relative(m.index) == rel)
    }
}

/// One orbit of a shell under a residual group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubOrbit {
    pub representative: LatticeSite,
    pub members: Vec<LatticeSite>,
}

impl SubOrbit {
    pub fn multiplicity(&self) -> usize {
        self.members.len()
    }
}

/// Ordering key for picking a canonical member: largest z, then y, then x.
fn canon_key(rel: Coord) -> (i32, i32, i32) {
    (rel[2], rel[1], rel[0])
}

fn canonical(rels: impl Iterator<Item = Coord>) -> Coord {
    rels.max_by_key(|&r| canon_key(r))
        .expect("orbit is never empty")
}

/// Groups every non-donor site within `max_radius_nm` into Td shells, sorted
/// by distance, then direction class, then canonical representative.
pub fn classify_shells(domain: &LatticeDomain, max_radius_nm: f64) -> Vec<ShellOrbit> {
    if max_radius_nm > domain.inradius_nm() {
        log::warn!(
            "shell radius {max_radius_nm} nm exceeds the domain inradius {:.3} nm; outer shells may be incomplete",
            domain.inradius_nm()
        );
    }
    let td = td_group();
    let q = domain.lattice_constant_nm() / 4.0;
    let mut shells: BTreeMap<(i32, DirectionClass, (i32, i32, i32)), Vec<LatticeSite>> =
        BTreeMap::new();
    for site in domain.sites() {
        if site.index == domain.donor_index() {
            continue;
        }
        let rel = domain.relative(site.index);
        let r2 = rel.iter().map(|x| x * x).sum::<i32>();
        if (r2 as f64).sqrt() * q > max_radius_nm {
            continue;
        }
        // key on the full Td orbit so truncated boxes still classify exactly
        let rep = canonical(td.elements().iter().map(|g| g.apply(rel)));
        shells
            .entry((r2, DirectionClass::of(rel), canon_key(rep)))
            .or_default()
            .push(*site);
    }
    shells
        .into_iter()
        .map(|((r2, class, _), members)| {
            let rep_rel = canonical(members.iter().map(|m| domain.relative(m.index)));
            let representative = *members
                .iter()
                .find(|m| domain.relative(m.index) == rep_rel)
                .expect("representative is a member");
            ShellOrbit {
                representative,
                members,
                distance_nm: (r2 as f64).sqrt() * q,
                squared_radius: r2,
                direction_class: class,
            }
        })
        .collect()
}

/// Splits a shell into orbits of `group`. Orbits are ordered by descending
/// multiplicity, then by canonical representative.
pub fn orbit_partition(
    domain: &LatticeDomain,
    shell: &ShellOrbit,
    group: &SymmetryGroup,
) -> Vec<SubOrbit> {
    let mut unassigned: Vec<Coord> = shell
        .members
        .iter()
        .map(|m| domain.relative(m.index))
        .collect();
    unassigned.sort_unstable();
    let mut orbits = Vec::new();
    let mut done: HashSet<Coord> = HashSet::new();
    for &start in &unassigned {
        if done.contains(&start) {
            continue;
        }
        let images: HashSet<Coord> = group.elements().iter().map(|g| g.apply(start)).collect();
        let mut members: Vec<LatticeSite> = shell
            .members
            .iter()
            .filter(|m| images.contains(&domain.relative(m.index)))
            .copied()
            .collect();
        members.sort_by_key(|m| m.index);
        for m in &members {
            done.insert(domain.relative(m.index));
        }
        let rep_rel = canonical(members.iter().map(|m| domain.relative(m.index)));
        let representative = *members
            .iter()
            .find(|m| domain.relative(m.index) == rep_rel)
            .expect("representative is a member");
        orbits.push(SubOrbit {
            representative,
            members,
        });
    }
    orbits.sort_by(|a, b| {
        b.multiplicity().cmp(&a.multiplicity()).then_with(|| {
            canon_key(domain.relative(b.representative.index))
                .cmp(&canon_key(domain.relative(a.representative.index)))
        })
    });
    orbits
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crystal::{build_lattice, residual_group, BoxPlacement};

    fn domain() -> LatticeDomain {
        build_lattice([3, 3, 3], [0, 0, 0], BoxPlacement::Centered).unwrap()
    }

    fn shell_of(domain: &LatticeDomain, shells: &[ShellOrbit], rel: Coord) -> ShellOrbit {
        shells
            .iter()
            .find(|s| s.contains_relative(domain, rel))
            .cloned()
            .unwrap()
    }

    #[test]
    fn shell_sizes() {
        let d = domain();
        let shells = classify_shells(&d, 1.2);
        assert_eq!(shell_of(&d, &shells, [0, 4, 0]).multiplicity(), 6);
        assert_eq!(shell_of(&d, &shells, [1, 1, 1]).multiplicity(), 4);
        assert_eq!(shell_of(&d, &shells, [0, 2, 2]).multiplicity(), 12);
        let s = shell_of(&d, &shells, [0, 4, 0]);
        assert_eq!(d.relative(s.representative.index), [0, 0, 4]);
        assert_eq!(s.direction_class, DirectionClass::D100);
    }

    #[test]
    fn every_site_in_exactly_one_shell() {
        let d = domain();
        let r = 1.3;
        let shells = classify_shells(&d, r);
        let mut seen = HashSet::new();
        for s in &shells {
            for m in &s.members {
                assert!(seen.insert(m.index));
                assert!((d.distance_nm(m.index) - s.distance_nm).abs() < 1e-12);
            }
        }
        let expected = d
            .sites()
            .iter()
            .filter(|s| s.index != d.donor_index() && d.distance_nm(s.index) <= r)
            .count();
        assert_eq!(seen.len(), expected);
        assert!(shells
            .windows(2)
            .all(|w| (w[0].squared_radius, w[0].direction_class)
                <= (w[1].squared_radius, w[1].direction_class)));
    }

    #[test]
    fn equal_radius_shells_are_separated() {
        // r² = 27 holds the [111] shell and (1,1,5)-type sites
        let d = domain();
        let shells = classify_shells(&d, 0.75);
        let at27: Vec<_> = shells.iter().filter(|s| s.squared_radius == 27).collect();
        assert!(at27.len() >= 2);
        let s111 = at27
            .iter()
            .find(|s| s.direction_class == DirectionClass::D111)
            .unwrap();
        assert_eq!(s111.multiplicity(), 4);
        assert!(s111.contains_relative(&d, [-3, -3, -3]));
    }

    #[test]
    fn splitting_under_field_010() {
        let d = domain();
        let shells = classify_shells(&d, 1.2);
        let g = residual_group([0.0, 1.0, 0.0]);
        let mults = |rel| -> Vec<usize> {
            orbit_partition(&d, &shell_of(&d, &shells, rel), &g)
                .iter()
                .map(|o| o.multiplicity())
                .collect()
        };
        assert_eq!(mults([0, 4, 0]), vec![4, 1, 1]);
        assert_eq!(mults([1, 1, 1]), vec![2, 2]);
        assert_eq!(mults([0, 2, 2]), vec![4, 4, 2, 2]);
        let s = shell_of(&d, &shells, [0, 4, 0]);
        let reps: Vec<Coord> = orbit_partition(&d, &s, &g)
            .iter()
            .map(|o| d.relative(o.representative.index))
            .collect();
        assert_eq!(reps, vec![[0, 0, 4], [0, 4, 0], [0, -4, 0]]);
    }

    #[test]
    fn zero_field_keeps_shells_whole() {
        let d = domain();
        let g = residual_group([0.0; 3]);
        for s in classify_shells(&d, 1.5) {
            let p = orbit_partition(&d, &s, &g);
            assert_eq!(p.len(), 1);
            assert_eq!(p[0].members, s.members);
        }
    }
}
