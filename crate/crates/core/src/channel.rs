//! Network geometry and random channel realizations.
//!
//! The service area is a `D x D` square split along the BS→Rx axis into `L`
//! serial slabs of size `D/L x D`. Relay group `l` lives in slab `l`. Every
//! matrix entry is `sqrt(linear pathloss gain) * small-scale coefficient`,
//! with the pathloss evaluated per node pair.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, cn01, CMat};

/// Upper bound on the total number of relays in one realization.
pub const MAX_TOTAL_RELAYS: usize = 10_000;

/// Distances below this are clamped before evaluating pathloss (meters).
pub const MIN_DISTANCE_M: f64 = 1.0;

const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub type Position = [f64; 3];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Heights {
    pub bs: f64,
    pub rx: f64,
    pub relay: f64,
}

impl Default for Heights {
    fn default() -> Self {
        Heights {
            bs: 5.0,
            rx: 5.0,
            relay: 1.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub bs_position: Position,
    pub rx_position: Position,
    /// One entry per relay group, ordered from the BS towards the Rx.
    pub relay_positions: Vec<Vec<Position>>,
    pub area_length: f64,
    pub heights: Heights,
}

impl Topology {
    pub fn num_groups(&self) -> usize {
        self.relay_positions.len()
    }

    pub fn relays_per_group(&self) -> Vec<usize> {
        self.relay_positions.iter().map(Vec::len).collect()
    }

    /// x-extent `[lo, hi]` of slab `l` (1-based).
    pub fn slab_bounds(&self, l: usize) -> (f64, f64) {
        let w = self.area_length / self.num_groups() as f64;
        ((l - 1) as f64 * w, l as f64 * w)
    }
}

/// Places the BS and Rx on opposite short edges and scatters `relays_per_group`
/// relays uniformly inside each of the `num_groups` slabs.
pub fn generate_topology(
    area_length: f64,
    num_groups: usize,
    relays_per_group: usize,
    heights: Heights,
    seed: u64,
) -> Result<Topology> {
    if !(area_length > 0.0) || !area_length.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "area length must be positive, got {area_length}"
        )));
    }
    if num_groups == 0 || relays_per_group == 0 {
        return Err(Error::InvalidArgument(format!(
            "need at least one group and one relay per group, got L={num_groups}, K={relays_per_group}"
        )));
    }
    let total = num_groups.saturating_mul(relays_per_group);
    if total > MAX_TOTAL_RELAYS {
        return Err(Error::ResourceLimit(format!(
            "{total} relays exceeds {MAX_TOTAL_RELAYS}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let slab = area_length / num_groups as f64;
    let relay_positions = (0..num_groups)
        .map(|g| {
            (0..relays_per_group)
                .map(|_| {
                    let x = slab * (g as f64 + rng.random::<f64>());
                    let y = area_length * rng.random::<f64>();
                    [x, y, heights.relay]
                })
                .collect()
        })
        .collect();
    Ok(Topology {
        bs_position: [0.0, area_length / 2.0, heights.bs],
        rx_position: [area_length, area_length / 2.0, heights.rx],
        relay_positions,
        area_length,
        heights,
    })
}

pub fn distance_3d(a: &Position, b: &Position) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

pub fn distance_2d(a: &Position, b: &Position) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LinkKind {
    BsRelay,
    RelayRelay,
    RelayRx,
    BsRx,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LosState {
    Los,
    Nlos,
    /// Drawn per node pair from [`los_probability`].
    Probabilistic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkParams {
    pub kind: LinkKind,
    pub pathloss_model: String,
    /// Linear Rician factor; only consulted for [`LinkKind::BsRx`]. May be `inf`.
    pub rician_kappa: f64,
    pub los_state: LosState,
    /// Heights of the transmitting and receiving end (meters).
    pub endpoint_heights: [f64; 2],
}

/// `intercept + distance_slope * log10(d / 1 m) + frequency_slope * log10(f / 1 GHz)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogDistance {
    pub intercept_db: f64,
    pub distance_slope_db: f64,
    pub frequency_slope_db: f64,
}

impl LogDistance {
    fn eval(&self, d: f64, f_ghz: f64) -> f64 {
        self.intercept_db
            + self.distance_slope_db * d.log10()
            + self.frequency_slope_db * f_ghz.log10()
    }
}

/// Coefficients of one pathloss model. NLoS values are floored at the LoS
/// value so that NLoS is never better than LoS at the same distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathlossModel {
    pub los: LogDistance,
    pub nlos: LogDistance,
    /// Apply the two-slope UMi LoS breakpoint (effective environment height 1 m).
    #[serde(default)]
    pub umi_breakpoint: bool,
}

pub const UMI_STREET_CANYON: &str = "umi-street-canyon";
pub const SIDELINK_URBAN: &str = "sidelink-urban";

/// Named pathloss models. The defaults hold the UMi street canyon model and
/// the urban sidelink model; entries can be overridden from the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathlossTable(pub BTreeMap<String, PathlossModel>);

impl Default for PathlossTable {
    fn default() -> Self {
        let mut m = BTreeMap::new();
        m.insert(
            UMI_STREET_CANYON.to_string(),
            PathlossModel {
                los: LogDistance {
                    intercept_db: 32.4,
                    distance_slope_db: 21.0,
                    frequency_slope_db: 20.0,
                },
                nlos: LogDistance {
                    intercept_db: 22.4,
                    distance_slope_db: 35.3,
                    frequency_slope_db: 21.3,
                },
                umi_breakpoint: true,
            },
        );
        m.insert(
            SIDELINK_URBAN.to_string(),
            PathlossModel {
                los: LogDistance {
                    intercept_db: 38.77,
                    distance_slope_db: 16.7,
                    frequency_slope_db: 18.2,
                },
                nlos: LogDistance {
                    intercept_db: 36.85,
                    distance_slope_db: 30.0,
                    frequency_slope_db: 18.9,
                },
                umi_breakpoint: false,
            },
        );
        PathlossTable(m)
    }
}

impl PathlossTable {
    pub fn model(&self, id: &str) -> Result<&PathlossModel> {
        self.0
            .get(id)
            .ok_or_else(|| Error::UnsupportedModel(id.to_string()))
    }

    /// Pathloss in dB for a resolved LoS/NLoS state. Distances below
    /// [`MIN_DISTANCE_M`] are clamped.
    pub fn pathloss_db(
        &self,
        model_id: &str,
        los: bool,
        distance_3d: f64,
        carrier_hz: f64,
        endpoint_heights: [f64; 2],
    ) -> Result<f64> {
        let model = self.model(model_id)?;
        let d = distance_3d.max(MIN_DISTANCE_M);
        let f_ghz = carrier_hz / 1e9;
        let los_db = if model.umi_breakpoint {
            umi_los_two_slope(&model.los, d, f_ghz, endpoint_heights)
        } else {
            model.los.eval(d, f_ghz)
        };
        if los {
            Ok(los_db)
        } else {
            Ok(model.nlos.eval(d, f_ghz).max(los_db))
        }
    }

    /// Evaluates a link at its configured state; a probabilistic link is
    /// evaluated as NLoS here, generation draws the state per node pair.
    pub fn link_pathloss_db(
        &self,
        link: &LinkParams,
        distance_3d: f64,
        carrier_hz: f64,
    ) -> Result<f64> {
        let los = link.los_state == LosState::Los;
        self.pathloss_db(
            &link.pathloss_model,
            los,
            distance_3d,
            carrier_hz,
            link.endpoint_heights,
        )
    }
}

fn umi_los_two_slope(near: &LogDistance, d: f64, f_ghz: f64, heights: [f64; 2]) -> f64 {
    let h_tx = (heights[0] - 1.0).max(0.0);
    let h_rx = (heights[1] - 1.0).max(0.0);
    let breakpoint = 4.0 * h_tx * h_rx * f_ghz * 1e9 / SPEED_OF_LIGHT;
    if breakpoint <= 0.0 || d <= breakpoint {
        near.eval(d, f_ghz)
    } else {
        let dh = heights[0] - heights[1];
        near.intercept_db + 40.0 * d.log10() + near.frequency_slope_db * f_ghz.log10()
            - 9.5 * (breakpoint * breakpoint + dh * dh).log10()
    }
}

/// UMi LoS probability `min(18/d, 1) (1 - e^{-d/36}) + e^{-d/36}`.
pub fn los_probability(d_2d: f64) -> f64 {
    let d = d_2d.max(0.0);
    if d <= 18.0 {
        return 1.0;
    }
    let e = (-d / 36.0).exp();
    (18.0 / d) * (1.0 - e) + e
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Thermal noise power in watts from a PSD in dBm/Hz and a bandwidth in Hz.
pub fn thermal_noise_watts(psd_dbm_per_hz: f64, bandwidth_hz: f64) -> f64 {
    db_to_linear(psd_dbm_per_hz - 30.0) * bandwidth_hz
}

/// Rank-one line-of-sight component: all ones, unit power per entry.
pub fn los_component(rows: usize, cols: usize) -> CMat {
    CMat::from_element(rows, cols, c(1.0, 0.0))
}

/// Unit-second-moment small-scale fading. BS–Rx links are Rician with factor
/// `link.rician_kappa` around [`los_component`]; all other links are i.i.d.
/// Rayleigh.
pub fn draw_small_scale<R: Rng + ?Sized>(
    link: &LinkParams,
    rows: usize,
    cols: usize,
    rng: &mut R,
) -> CMat {
    let scattered = CMat::from_fn(rows, cols, |_, _| cn01(rng));
    if link.kind != LinkKind::BsRx {
        return scattered;
    }
    let kappa = link.rician_kappa;
    if kappa.is_infinite() {
        return los_component(rows, cols);
    }
    let w_los = (kappa / (kappa + 1.0)).sqrt();
    let w_nlos = (1.0 / (kappa + 1.0)).sqrt();
    los_component(rows, cols) * c(w_los, 0.0) + scattered * c(w_nlos, 0.0)
}

/// Link settings for the four link classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkSet {
    pub bs_relay: LinkParams,
    pub relay_relay: LinkParams,
    pub relay_rx: LinkParams,
    pub bs_rx: LinkParams,
}

impl LinkSet {
    /// Forced NLoS UMi for BS/Rx links, probabilistic sidelink between relays.
    pub fn standard(heights: Heights, rician_kappa: f64) -> Self {
        let mk = |kind, model: &str, los_state, endpoint_heights| LinkParams {
            kind,
            pathloss_model: model.to_string(),
            rician_kappa,
            los_state,
            endpoint_heights,
        };
        LinkSet {
            bs_relay: mk(
                LinkKind::BsRelay,
                UMI_STREET_CANYON,
                LosState::Nlos,
                [heights.bs, heights.relay],
            ),
            relay_relay: mk(
                LinkKind::RelayRelay,
                SIDELINK_URBAN,
                LosState::Probabilistic,
                [heights.relay, heights.relay],
            ),
            relay_rx: mk(
                LinkKind::RelayRx,
                UMI_STREET_CANYON,
                LosState::Nlos,
                [heights.rx, heights.relay],
            ),
            bs_rx: mk(
                LinkKind::BsRx,
                UMI_STREET_CANYON,
                LosState::Nlos,
                [heights.bs, heights.rx],
            ),
        }
    }
}

/// One channel realization: hop matrices `H_1 .. H_{L+1}` and an optional
/// direct link `H_0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    pub direct: Option<CMat>,
    /// `hops[0] = H_1` (K_1 x N_t), ..., `hops[L] = H_{L+1}` (N_r x K_L).
    pub hops: Vec<CMat>,
    pub carrier_hz: f64,
    pub seed: u64,
}

impl ChannelSet {
    pub fn new(direct: Option<CMat>, hops: Vec<CMat>, carrier_hz: f64, seed: u64) -> Result<Self> {
        let ch = ChannelSet {
            direct,
            hops,
            carrier_hz,
            seed,
        };
        ch.validate()?;
        Ok(ch)
    }

    pub fn validate(&self) -> Result<()> {
        if self.hops.len() < 2 {
            return Err(Error::Shape(format!(
                "need at least two hops, got {}",
                self.hops.len()
            )));
        }
        for (i, pair) in self.hops.windows(2).enumerate() {
            if pair[1].ncols() != pair[0].nrows() {
                return Err(Error::Shape(format!(
                    "hop {} has {} columns but hop {} has {} rows",
                    i + 2,
                    pair[1].ncols(),
                    i + 1,
                    pair[0].nrows()
                )));
            }
        }
        if let Some(h0) = &self.direct {
            if h0.shape() != (self.n_r(), self.n_t()) {
                return Err(Error::Shape(format!(
                    "direct link is {:?}, expected {:?}",
                    h0.shape(),
                    (self.n_r(), self.n_t())
                )));
            }
        }
        let finite = self
            .hops
            .iter()
            .chain(self.direct.iter())
            .all(|m| m.iter().all(|z| z.re.is_finite() && z.im.is_finite()));
        if !finite {
            return Err(Error::NonFinite("channel entries".into()));
        }
        Ok(())
    }

    pub fn num_groups(&self) -> usize {
        self.hops.len() - 1
    }

    pub fn n_t(&self) -> usize {
        self.hops[0].ncols()
    }

    pub fn n_r(&self) -> usize {
        self.hops[self.hops.len() - 1].nrows()
    }

    pub fn group_sizes(&self) -> Vec<usize> {
        self.hops[..self.num_groups()]
            .iter()
            .map(|h| h.nrows())
            .collect()
    }

    /// `H_l` for `l` in `1..=L+1`.
    pub fn hop(&self, l: usize) -> &CMat {
        &self.hops[l - 1]
    }
}

// Independent ChaCha streams per link class keep the relay cascade identical
// whether or not the direct link is drawn.
const STREAM_HOPS: u64 = 1;
const STREAM_LOS: u64 = 2;
const STREAM_DIRECT: u64 = 3;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Draws one channel realization over `topo` with `n_t` transmit and `n_r`
/// receive antennas. Deterministic in `seed`.
#[allow(clippy::too_many_arguments)]
pub fn generate_channel_set(
    topo: &Topology,
    links: &LinkSet,
    table: &PathlossTable,
    carrier_hz: f64,
    antennas: (usize, usize),
    direct_link: bool,
    seed: u64,
) -> Result<ChannelSet> {
    let (n_t, n_r) = antennas;
    if n_t == 0 || n_r == 0 {
        return Err(Error::InvalidArgument(
            "antenna counts must be positive".into(),
        ));
    }
    if !(carrier_hz > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "carrier frequency must be positive, got {carrier_hz}"
        )));
    }
    let groups = &topo.relay_positions;
    if groups.is_empty() || groups.iter().any(Vec::is_empty) {
        return Err(Error::InvalidArgument(
            "topology needs non-empty relay groups".into(),
        ));
    }
    let total: usize = groups.iter().map(Vec::len).sum();
    if total > MAX_TOTAL_RELAYS {
        return Err(Error::ResourceLimit(format!(
            "{total} relays exceeds {MAX_TOTAL_RELAYS}"
        )));
    }
    for l in [
        &links.bs_relay,
        &links.relay_relay,
        &links.relay_rx,
        &links.bs_rx,
    ] {
        table.model(&l.pathloss_model)?;
        if !(l.rician_kappa >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "rician kappa must be >= 0, got {}",
                l.rician_kappa
            )));
        }
    }

    let mut fading = stream(seed, STREAM_HOPS);
    let mut los_rng = stream(seed, STREAM_LOS);

    // Entry (i, j) couples transmitter j to receiver i.
    let mut hop = |rx: &[Position], tx: &[Position], link: &LinkParams| -> Result<CMat> {
        let small = draw_small_scale(link, rx.len(), tx.len(), &mut fading);
        let mut h = CMat::zeros(rx.len(), tx.len());
        for (i, pr) in rx.iter().enumerate() {
            for (j, pt) in tx.iter().enumerate() {
                let los = match link.los_state {
                    LosState::Los => true,
                    LosState::Nlos => false,
                    LosState::Probabilistic => {
                        los_rng.random::<f64>() < los_probability(distance_2d(pr, pt))
                    }
                };
                let pl = table.pathloss_db(
                    &link.pathloss_model,
                    los,
                    distance_3d(pr, pt),
                    carrier_hz,
                    link.endpoint_heights,
                )?;
                h[(i, j)] = small[(i, j)] * db_to_linear(-pl).sqrt();
            }
        }
        Ok(h)
    };

    let bs = vec![topo.bs_position; n_t];
    let rx = vec![topo.rx_position; n_r];
    let mut hops = Vec::with_capacity(groups.len() + 1);
    hops.push(hop(&groups[0], &bs, &links.bs_relay)?);
    for pair in groups.windows(2) {
        hops.push(hop(&pair[1], &pair[0], &links.relay_relay)?);
    }
    hops.push(hop(&rx, &groups[groups.len() - 1], &links.relay_rx)?);

    let direct = if direct_link {
        let mut rng = stream(seed, STREAM_DIRECT);
        let link = &links.bs_rx;
        let pl = table.link_pathloss_db(
            link,
            distance_3d(&topo.bs_position, &topo.rx_position),
            carrier_hz,
        )?;
        let small = draw_small_scale(link, n_r, n_t, &mut rng);
        Some(small * c(db_to_linear(-pl).sqrt(), 0.0))
    } else {
        None
    };

    ChannelSet::new(direct, hops, carrier_hz, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> PathlossTable {
        PathlossTable::default()
    }

    #[test]
    fn umi_nlos_at_100m_28ghz() {
        let pl = table()
            .pathloss_db(UMI_STREET_CANYON, false, 100.0, 28e9, [5.0, 1.5])
            .unwrap();
        let oracle = 22.4 + 35.3 * 100f64.log10() + 21.3 * 28f64.log10();
        assert!((pl - oracle).abs() < 1e-12);
        assert!((pl - 123.8).abs() < 0.05);
    }

    #[test]
    fn distance_clamp() {
        let t = table();
        let a = t
            .pathloss_db(UMI_STREET_CANYON, false, 0.5, 28e9, [5.0, 1.5])
            .unwrap();
        let b = t
            .pathloss_db(UMI_STREET_CANYON, false, 1.0, 28e9, [5.0, 1.5])
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn unknown_model_is_rejected() {
        let err = table()
            .pathloss_db("free-space", false, 10.0, 28e9, [5.0, 1.5])
            .unwrap_err();
        assert!(matches!(err, Error::UnsupportedModel(_)));
    }

    #[test]
    fn nlos_never_beats_los_and_monotone() {
        let t = table();
        for id in [UMI_STREET_CANYON, SIDELINK_URBAN] {
            let mut prev = (f64::NEG_INFINITY, f64::NEG_INFINITY);
            let mut d = 0.2;
            while d < 5000.0 {
                let los = t.pathloss_db(id, true, d, 28e9, [5.0, 1.5]).unwrap();
                let nlos = t.pathloss_db(id, false, d, 28e9, [5.0, 1.5]).unwrap();
                assert!(nlos >= los, "{id} at {d}");
                assert!(
                    los >= prev.0 - 1e-9 && nlos >= prev.1 - 1e-9,
                    "{id} not monotone at {d}"
                );
                prev = (los, nlos);
                d *= 1.05;
            }
        }
    }

    #[test]
    fn los_probability_curve() {
        assert_eq!(los_probability(0.0), 1.0);
        assert!(los_probability(1e6) < 1e-4);
        let oracle = (18.0 / 50.0) * (1.0 - (-50.0f64 / 36.0).exp()) + (-50.0f64 / 36.0).exp();
        assert!((los_probability(50.0) - oracle).abs() < 1e-15);
        assert!((los_probability(50.0) - 0.519_58).abs() < 1e-4);
        let mut prev = 1.0;
        for i in 0..2000 {
            let p = los_probability(i as f64 * 0.5);
            assert!((0.0..=1.0).contains(&p) && p <= prev + 1e-15);
            prev = p;
        }
    }

    #[test]
    fn single_region_geometry() {
        let t = generate_topology(100.0, 1, 1, Heights::default(), 7).unwrap();
        let p = t.relay_positions[0][0];
        assert!((0.0..=100.0).contains(&p[0]) && (0.0..=100.0).contains(&p[1]));
        assert_eq!(distance_2d(&t.bs_position, &t.rx_position), 100.0);
    }

    #[test]
    fn relays_stay_in_their_slabs() {
        let t = generate_topology(200.0, 5, 12, Heights::default(), 11).unwrap();
        assert_eq!(t.relays_per_group(), vec![12; 5]);
        for l in 1..=5 {
            let (lo, hi) = t.slab_bounds(l);
            for p in &t.relay_positions[l - 1] {
                assert!(p[0] >= lo && p[0] <= hi && p[1] >= 0.0 && p[1] <= 200.0);
            }
        }
        let again = generate_topology(200.0, 5, 12, Heights::default(), 11).unwrap();
        assert_eq!(t, again);
    }

    #[test]
    fn topology_rejects_bad_dimensions() {
        assert!(generate_topology(0.0, 1, 1, Heights::default(), 0).is_err());
        assert!(generate_topology(10.0, 0, 1, Heights::default(), 0).is_err());
        assert!(generate_topology(10.0, 1, 0, Heights::default(), 0).is_err());
        assert!(matches!(
            generate_topology(10.0, 101, 100, Heights::default(), 0),
            Err(Error::ResourceLimit(_))
        ));
    }

    #[test]
    fn infinite_kappa_is_pure_los() {
        let mut link = LinkSet::standard(Heights::default(), f64::INFINITY).bs_rx;
        link.rician_kappa = f64::INFINITY;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(draw_small_scale(&link, 3, 2, &mut rng), los_component(3, 2));
    }

    #[test]
    fn blocked_direct_link_is_absent() {
        let h = Heights::default();
        let t = generate_topology(100.0, 1, 1, h, 3).unwrap();
        let links = LinkSet::standard(h, 1.0);
        let off = generate_channel_set(&t, &links, &table(), 28e9, (1, 1), false, 5).unwrap();
        assert!(off.direct.is_none());
        assert_eq!(off.hops.len(), 2);
        assert_eq!(off.hops[0].shape(), (1, 1));
        let on = generate_channel_set(&t, &links, &table(), 28e9, (1, 1), true, 5).unwrap();
        assert!(on.direct.is_some());
        // cascade unaffected by the direct-link draw
        assert_eq!(on.hops, off.hops);
    }

    #[test]
    fn generation_is_deterministic_and_chained() {
        let h = Heights::default();
        let t = generate_topology(200.0, 3, 4, h, 9).unwrap();
        let links = LinkSet::standard(h, 1.0);
        let a = generate_channel_set(&t, &links, &table(), 28e9, (6, 5), true, 42).unwrap();
        let b = generate_channel_set(&t, &links, &table(), 28e9, (6, 5), true, 42).unwrap();
        assert_eq!(a, b);
        let mut prod = a.hops[0].clone();
        for h in &a.hops[1..] {
            prod = h * prod;
        }
        assert_eq!(prod.shape(), (5, 6));
        assert_eq!(a.group_sizes(), vec![4, 4, 4]);
    }
}
