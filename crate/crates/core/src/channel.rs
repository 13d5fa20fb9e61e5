//! Large-scale path loss, Rayleigh fading and sub-surface grouping.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ComplexVector, C64};

/// Node placement and path-loss parameters, coordinates in meters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Geometry {
    pub user_pos: [f64; 3],
    pub ap_pos: [f64; 3],
    pub irs_center: [f64; 3],
    pub pathloss_exp_ua: f64,
    pub pathloss_exp_ui: f64,
    pub pathloss_exp_ia: f64,
    /// Channel power gain at 1 m, in dB.
    pub ref_gain_db: f64,
}

impl Default for Geometry {
    fn default() -> Self {
        Self {
            user_pos: [20.0, 50.0, 0.0],
            ap_pos: [20.0, 0.0, 0.0],
            irs_center: [18.0, 50.0, 0.0],
            pathloss_exp_ua: 4.5,
            pathloss_exp_ui: 2.2,
            pathloss_exp_ia: 2.5,
            ref_gain_db: -30.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Link {
    /// user to AP (direct)
    UserAp,
    /// user to IRS
    UserIrs,
    /// IRS to AP
    IrsAp,
}

fn distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

impl Geometry {
    pub fn validate(&self) -> Result<()> {
        for link in [Link::UserAp, Link::UserIrs, Link::IrsAp] {
            let (d, exp) = self.link_params(link);
            if !(d > 0.0) {
                return Err(Error::InvalidConfig(format!("{link:?} distance must be positive")));
            }
            if !(1.5..=6.0).contains(&exp) {
                return Err(Error::InvalidConfig(format!(
                    "{link:?} path-loss exponent {exp} outside [1.5, 6]"
                )));
            }
        }
        if !self.ref_gain_db.is_finite() {
            return Err(Error::InvalidConfig("reference gain must be finite".into()));
        }
        Ok(())
    }

    fn link_params(&self, link: Link) -> (f64, f64) {
        match link {
            Link::UserAp => (distance(&self.user_pos, &self.ap_pos), self.pathloss_exp_ua),
            Link::UserIrs => (distance(&self.user_pos, &self.irs_center), self.pathloss_exp_ui),
            Link::IrsAp => (distance(&self.irs_center, &self.ap_pos), self.pathloss_exp_ia),
        }
    }

    /// Linear power gain `10^(ref/10) · d^(-exponent)` of one link.
    pub fn path_gain(&self, link: Link) -> f64 {
        let (d, exp) = self.link_params(link);
        10f64.powf(self.ref_gain_db / 10.0) * d.powf(-exp)
    }
}

/// Element-level channel draws for one fading block.
#[derive(Clone, Debug, PartialEq)]
pub struct ElementChannels {
    pub h_ua: C64,
    pub h_ui_elems: ComplexVector,
    /// IRS-AP channels in conjugate-transposed convention.
    pub h_ia_elems: ComplexVector,
}

/// A grouped channel realization.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelRealization {
    pub h_ua: C64,
    pub h_ui_elems: ComplexVector,
    pub h_ia_elems: ComplexVector,
    /// Grouped cascaded channel, one entry per sub-surface.
    pub h_r: ComplexVector,
    /// Extended channel `[conj(h_ua), h_r]`.
    pub h_ext: ComplexVector,
}

impl ChannelRealization {
    pub fn m_groups(&self) -> usize {
        self.h_r.len()
    }
}

/// Draws one `CN(0, variance)` sample.
pub fn complex_gaussian(rng: &mut impl Rng, variance: f64) -> C64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re * s, im * s)
}

/// Rayleigh fading draws: the direct link first, then the N user-IRS
/// coefficients, then the N IRS-AP coefficients.
pub fn sample_channels(geometry: &Geometry, n_elements: usize, rng: &mut impl Rng) -> ElementChannels {
    assert!(n_elements >= 1, "at least one IRS element is required");
    let g_ua = geometry.path_gain(Link::UserAp);
    let g_ui = geometry.path_gain(Link::UserIrs);
    let g_ia = geometry.path_gain(Link::IrsAp);
    let h_ua = complex_gaussian(rng, g_ua);
    let h_ui_elems = (0..n_elements).map(|_| complex_gaussian(rng, g_ui)).collect();
    let h_ia_elems = (0..n_elements).map(|_| complex_gaussian(rng, g_ia)).collect();
    ElementChannels {
        h_ua,
        h_ui_elems,
        h_ia_elems,
    }
}

/// Sums the cascaded channels of each block of `N/M` adjacent elements.
pub fn group_channels(elements: &ElementChannels, m_groups: usize) -> Result<ChannelRealization> {
    let n = elements.h_ui_elems.len();
    if elements.h_ia_elems.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} user-IRS vs {} IRS-AP coefficients",
            n,
            elements.h_ia_elems.len()
        )));
    }
    if m_groups == 0 || !n.is_multiple_of(m_groups) {
        return Err(Error::IndivisibleGrouping {
            elements: n,
            groups: m_groups,
        });
    }
    let size = n / m_groups;
    let h_r: ComplexVector = (0..m_groups)
        .map(|m| {
            (m * size..(m + 1) * size)
                .map(|e| elements.h_ia_elems[e].conj() * elements.h_ui_elems[e])
                .sum()
        })
        .collect();
    let h_ext = std::iter::once(elements.h_ua.conj()).chain(h_r.iter().copied()).collect();
    Ok(ChannelRealization {
        h_ua: elements.h_ua,
        h_ui_elems: elements.h_ui_elems.clone(),
        h_ia_elems: elements.h_ia_elems.clone(),
        h_r,
        h_ext,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn unit_distance_gain_is_reference() {
        let g = Geometry {
            user_pos: [0.0, 0.0, 0.0],
            ap_pos: [1.0, 0.0, 0.0],
            pathloss_exp_ua: 3.7,
            ..Geometry::default()
        };
        assert!((g.path_gain(Link::UserAp) - 1e-3).abs() < 1e-18);
    }

    #[test]
    fn default_direct_link_gain() {
        let g = Geometry::default();
        let expected = 1e-3 * 50f64.powf(-4.5);
        assert!((g.path_gain(Link::UserAp) / expected - 1.0).abs() < 1e-12);
    }

    #[test]
    fn inverse_square_law() {
        let near = Geometry {
            user_pos: [0.0, 0.0, 0.0],
            ap_pos: [3.0, 0.0, 0.0],
            pathloss_exp_ua: 2.0,
            ..Geometry::default()
        };
        let far = Geometry {
            ap_pos: [6.0, 0.0, 0.0],
            ..near.clone()
        };
        let ratio = far.path_gain(Link::UserAp) / near.path_gain(Link::UserAp);
        assert!((ratio - 0.25).abs() < 1e-15);
    }

    #[test]
    fn geometry_validation() {
        assert!(Geometry::default().validate().is_ok());
        let bad_exp = Geometry {
            pathloss_exp_ia: 7.0,
            ..Geometry::default()
        };
        assert!(bad_exp.validate().is_err());
        let colocated = Geometry {
            irs_center: [20.0, 50.0, 0.0],
            ..Geometry::default()
        };
        assert!(colocated.validate().is_err());
    }

    #[test]
    fn fading_power_and_circular_symmetry() {
        let g = Geometry::default();
        let gain = g.path_gain(Link::UserIrs);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let draws = 100_000;
        let (mut p, mut re2, mut im2) = (0.0, 0.0, 0.0);
        for _ in 0..draws {
            let z = complex_gaussian(&mut rng, gain);
            p += z.norm_sqr();
            re2 += z.re * z.re;
            im2 += z.im * z.im;
        }
        let n = draws as f64;
        assert!((p / n / gain - 1.0).abs() < 0.02);
        assert!((re2 / n / (gain / 2.0) - 1.0).abs() < 0.02);
        assert!((im2 / n / (gain / 2.0) - 1.0).abs() < 0.02);
    }

    #[test]
    fn sampling_is_deterministic() {
        let g = Geometry::default();
        let a = sample_channels(&g, 16, &mut ChaCha8Rng::seed_from_u64(42));
        let b = sample_channels(&g, 16, &mut ChaCha8Rng::seed_from_u64(42));
        assert_eq!(a, b);
    }

    #[test]
    fn singleton_groups() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let el = sample_channels(&Geometry::default(), 6, &mut rng);
        let ch = group_channels(&el, 6).unwrap();
        for m in 0..6 {
            assert_eq!(ch.h_r[m], el.h_ia_elems[m].conj() * el.h_ui_elems[m]);
        }
        assert_eq!(ch.h_ext.len(), 7);
        assert_eq!(ch.h_ext[0], el.h_ua.conj());
    }

    #[test]
    fn unit_channels_sum_per_group() {
        let el = ElementChannels {
            h_ua: c(1.0),
            h_ui_elems: ComplexVector::from_real(&[1.0; 4]),
            h_ia_elems: ComplexVector::from_real(&[1.0; 4]),
        };
        let ch = group_channels(&el, 2).unwrap();
        assert_eq!(ch.h_r, ComplexVector::from_real(&[2.0, 2.0]));
    }

    #[test]
    fn indivisible_grouping() {
        let el = sample_channels(&Geometry::default(), 4, &mut ChaCha8Rng::seed_from_u64(0));
        assert!(matches!(
            group_channels(&el, 3),
            Err(Error::IndivisibleGrouping { elements: 4, groups: 3 })
        ));
    }

    #[test]
    fn all_ones_reflection_gives_total_channel() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let el = sample_channels(&Geometry::default(), 12, &mut rng);
            let ch = group_channels(&el, 4).unwrap();
            let theta = ComplexVector::from_real(&[1.0; 5]);
            let effective = theta.inner(&ch.h_ext);
            let direct: C64 = el.h_ua.conj() + ch.h_r.iter().sum::<C64>();
            assert!((effective - direct).norm() <= 1e-12 * direct.norm());
        }
    }

    #[test]
    fn coarse_grouping_is_sum_of_fine_grouping() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let el = sample_channels(&Geometry::default(), 24, &mut rng);
        let fine = group_channels(&el, 24).unwrap();
        for m in [1, 2, 3, 4, 6, 8, 12] {
            let coarse = group_channels(&el, m).unwrap();
            let size = 24 / m;
            for g in 0..m {
                let summed: C64 = fine.h_r[g * size..(g + 1) * size].iter().sum();
                assert!((summed - coarse.h_r[g]).norm() <= 1e-12 * summed.norm().max(1e-30));
            }
        }
    }
}
