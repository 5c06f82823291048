//! Desired aggregate behavior, participation factors and per-device
//! reference models.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lti::RationalTF;

/// Aggregate specification: `Δf = tf_pf Δp` and `Δv = tf_qv Δq`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesiredBehavior {
    pub tf_pf: RationalTF,
    pub tf_qv: RationalTF,
    /// Use `tf_vq` (voltage to reactive power) as the voltage target instead of inverting `tf_qv`.
    pub direction_vq: bool,
    pub tf_vq: Option<RationalTF>,
}

/// `tf_pf = 1/(H_p s + D_p)`, `tf_qv = D_q`.
pub fn make_tdes(h_p: f64, d_p: f64, d_q: f64) -> Result<DesiredBehavior> {
    if !(d_p > 0.0) || !(d_q > 0.0) {
        return Err(Error::NonPositiveDroop);
    }
    if !(h_p >= 0.0) {
        return Err(Error::NegativeInertia);
    }
    Ok(DesiredBehavior {
        tf_pf: RationalTF::new(&[1.0], &[d_p, h_p])?,
        tf_qv: RationalTF::constant(d_q),
        direction_vq: false,
        tf_vq: None,
    })
}

impl DesiredBehavior {
    /// Switches the voltage target to a direct voltage-to-reactive-power map.
    pub fn with_vq(mut self, tf_vq: RationalTF) -> Self {
        self.direction_vq = true;
        self.tf_vq = Some(tf_vq);
        self
    }

    /// Voltage-to-reactive-power target the fleet has to sum to.
    pub fn vq_target(&self, tau_aug: f64) -> Result<RationalTF> {
        if self.direction_vq {
            return self.tf_vq.clone().ok_or(Error::InverseOfZero);
        }
        let inv = self.tf_qv.inverse()?;
        if inv.is_static() || !inv.is_proper() {
            inv.mul(&RationalTF::first_order(1.0, tau_aug)?)
        } else {
            Ok(inv)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    /// Power to frequency.
    Fp,
    /// Voltage to reactive power.
    Vq,
    /// Rotational active power to frequency.
    FpPrime,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AdpfKind {
    Lpf { tau: f64 },
    Hpf { tau: f64 },
    Bpf { tau_low: f64, tau_high: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorKind {
    Lpf,
    Hpf,
    Bpf,
    Complement,
}

/// A dynamic participation factor `m(s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticipationFactor {
    pub kind: FactorKind,
    /// Roll-off time constant (the high-pass stage for band-pass factors).
    pub tau: f64,
    /// Low-pass stage of a band-pass factor.
    pub tau_high: f64,
    /// DC gain.
    pub mu: f64,
    /// Scale applied to HPF, BPF and complement shapes (hybrid splitting).
    pub weight: f64,
    pub channel: Channel,
    /// Factors a complement completes.
    pub completes: Vec<ParticipationFactor>,
    tf: RationalTF,
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidTimeConstant { tau })
    }
}

/// Builds an LPF, HPF or BPF factor; `mu` is ignored for the high- and band-pass kinds.
pub fn make_adpf(kind: AdpfKind, mu: f64, channel: Channel) -> Result<ParticipationFactor> {
    match kind {
        AdpfKind::Lpf { tau } => {
            check_tau(tau)?;
            if !(0.0..=1.0).contains(&mu) {
                return Err(Error::InvalidGain { mu });
            }
            Ok(ParticipationFactor {
                kind: FactorKind::Lpf,
                tau,
                tau_high: 0.0,
                mu,
                weight: 1.0,
                channel,
                completes: Vec::new(),
                tf: RationalTF::first_order(mu, tau)?,
            })
        }
        AdpfKind::Hpf { tau } => {
            check_tau(tau)?;
            Ok(ParticipationFactor {
                kind: FactorKind::Hpf,
                tau,
                tau_high: 0.0,
                mu: 0.0,
                weight: 1.0,
                channel,
                completes: Vec::new(),
                tf: RationalTF::new(&[0.0, tau], &[1.0, tau])?,
            })
        }
        AdpfKind::Bpf { tau_low, tau_high } => {
            check_tau(tau_low)?;
            check_tau(tau_high)?;
            if !(tau_low > tau_high) {
                return Err(Error::InvalidBandSplit { tau_low, tau_high });
            }
            let hp = RationalTF::new(&[0.0, tau_low], &[1.0, tau_low])?;
            let lp = RationalTF::first_order(1.0, tau_high)?;
            Ok(ParticipationFactor {
                kind: FactorKind::Bpf,
                tau: tau_low,
                tau_high,
                mu: 0.0,
                weight: 1.0,
                channel,
                completes: Vec::new(),
                tf: hp.mul(&lp)?,
            })
        }
    }
}

impl ParticipationFactor {
    pub fn tf(&self) -> &RationalTF {
        &self.tf
    }

    pub fn eval(&self, omega: f64) -> Result<Complex64> {
        self.tf.freq(omega)
    }

    pub fn dc_gain(&self) -> f64 {
        self.tf.num().first().copied().unwrap_or(0.0) / self.tf.den()[0]
    }

    pub fn is_zero(&self) -> bool {
        self.tf.is_zero()
    }

    /// Same shape scaled by `k`; LPF gains scale `mu`, the others scale `weight`.
    pub fn scaled(&self, k: f64) -> ParticipationFactor {
        let mut out = self.clone();
        match self.kind {
            FactorKind::Lpf => out.mu *= k,
            _ => {
                out.weight *= k;
                out.mu *= k;
            }
        }
        out.tf = self.tf.scale(k);
        out
    }

    /// Rebuilds an LPF with a new DC gain, keeping its time constant.
    pub fn with_mu(&self, mu: f64) -> Result<ParticipationFactor> {
        match self.kind {
            FactorKind::Lpf => make_adpf(AdpfKind::Lpf { tau: self.tau }, mu, self.channel),
            _ => Ok(self.clone()),
        }
    }

    pub fn with_channel(&self, channel: Channel) -> ParticipationFactor {
        let mut out = self.clone();
        out.channel = channel;
        out
    }
}

/// `1 - Σ m_i(s)`, scaled by `weight`.
pub fn complete_weighted(
    factors: &[ParticipationFactor],
    channel: Channel,
    weight: f64,
) -> Result<ParticipationFactor> {
    if factors.iter().any(|f| f.channel != channel) {
        return Err(Error::ChannelMismatch);
    }
    let sum_mu: f64 = factors.iter().map(|f| f.dc_gain()).sum();
    if sum_mu > 1.0 + 1e-12 {
        return Err(Error::OverSubscribed { sum: sum_mu });
    }
    let mut acc = RationalTF::zero();
    for f in factors {
        acc = acc.add(f.tf())?;
    }
    let mut comp = RationalTF::one().sub(&acc)?;
    if (1.0 - sum_mu).abs() <= 1e-12 && !comp.is_zero() {
        let mut num = comp.num().to_vec();
        num[0] = 0.0;
        comp = RationalTF::new(&num, comp.den())?;
    }
    let mu = comp.dc_gain().unwrap_or(0.0);
    Ok(ParticipationFactor {
        kind: FactorKind::Complement,
        tau: 0.0,
        tau_high: 0.0,
        mu: mu * weight,
        weight,
        channel,
        completes: factors.to_vec(),
        tf: comp.scale(weight),
    })
}

/// The factor that makes the listed factors sum to one identically in `s`.
pub fn complete_fleet(factors: &[ParticipationFactor], channel: Channel) -> Result<ParticipationFactor> {
    if factors.is_empty() {
        return Err(Error::EmptyFleet);
    }
    complete_weighted(factors, channel, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Forming,
    Following,
}

/// One distributed energy resource and its realized reference models.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceSpec {
    pub name: String,
    pub bus: String,
    pub role: Role,
    /// Rating in MVA.
    pub rating: f64,
    /// Resource time constant bounding how fast the device may participate.
    pub tau_dc: f64,
    /// Active power capacity (pu).
    pub p_capacity: f64,
    /// Apparent power rating (pu).
    pub s_rating: f64,
    pub factor_fp: Option<ParticipationFactor>,
    pub factor_vq: Option<ParticipationFactor>,
    /// `T^pf` for forming devices, `T^fp` for following devices.
    pub ref_pf: Option<RationalTF>,
    pub ref_vq: Option<RationalTF>,
}

impl DeviceSpec {
    pub fn factor(&self, channel: Channel) -> Option<&ParticipationFactor> {
        match channel {
            Channel::Fp | Channel::FpPrime => self.factor_fp.as_ref(),
            Channel::Vq => self.factor_vq.as_ref(),
        }
    }

    pub fn participates_fp(&self) -> bool {
        self.factor_fp.as_ref().is_some_and(|f| !f.is_zero())
    }

    pub fn q_capacity(&self) -> f64 {
        let d = self.s_rating * self.s_rating - self.p_capacity * self.p_capacity;
        if d > 0.0 {
            libm::sqrt(d)
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignOptions {
    /// PLL roll-off time constant for following devices.
    pub tau_pll: f64,
    /// Number of PLL roll-off stages; `None` picks the smallest that makes the model proper.
    pub pll_order: Option<usize>,
    /// Low-pass augmentation used when inverting a static or improper `tf_qv`.
    pub tau_aug: f64,
    /// Time constant of the poles appended to make reference models proper.
    pub tau_fix: f64,
}

impl Default for DesignOptions {
    fn default() -> Self {
        DesignOptions {
            tau_pll: 0.01,
            pll_order: None,
            tau_aug: 0.01,
            tau_fix: 1e-3,
        }
    }
}

fn roll_off(tf: RationalTF, tau_fix: f64) -> Result<RationalTF> {
    let mut tf = tf;
    let pole = RationalTF::first_order(1.0, tau_fix)?;
    while !tf.is_proper() {
        tf = tf.mul(&pole).map_err(|_| Error::ImproperAfterAugmentation)?;
    }
    Ok(tf)
}

fn participating(f: Option<&ParticipationFactor>) -> Option<&ParticipationFactor> {
    f.filter(|f| !f.is_zero())
}

/// `(m_pf^{-1} T_pf, m_vq T_qv^{-1})` for a forming device, made proper.
pub fn disaggregate_forming(
    desired: &DesiredBehavior,
    factor_fp: Option<&ParticipationFactor>,
    factor_vq: Option<&ParticipationFactor>,
    opts: &DesignOptions,
) -> Result<(Option<RationalTF>, Option<RationalTF>)> {
    let ref_pf = match participating(factor_fp) {
        Some(m) => Some(roll_off(m.tf().inverse()?.mul(&desired.tf_pf)?, opts.tau_fix)?),
        None => None,
    };
    let ref_vq = match participating(factor_vq) {
        Some(m) => Some(roll_off(m.tf().mul(&desired.vq_target(opts.tau_aug)?)?, opts.tau_fix)?),
        None => None,
    };
    Ok((ref_pf, ref_vq))
}

/// PLL roll-off `1/(τ s + 1)^d`, choosing `d` when not given.
fn pll_filter(base: &RationalTF, opts: &DesignOptions) -> Result<(RationalTF, usize)> {
    let d = match opts.pll_order {
        Some(d) => d,
        None => {
            let rel = base.relative_degree();
            if rel >= 0 {
                1
            } else {
                (-rel) as usize
            }
        }
    };
    Ok((RationalTF::first_order(1.0, opts.tau_pll)?.powi(d)?, d))
}

/// `(m_fp T_pf^{-1} / (τ_pll s+1)^d, forming T_vq / (τ_pll s+1)^d)` for a following device.
pub fn disaggregate_following(
    desired: &DesiredBehavior,
    factor_fp: Option<&ParticipationFactor>,
    factor_vq: Option<&ParticipationFactor>,
    opts: &DesignOptions,
) -> Result<(Option<RationalTF>, Option<RationalTF>)> {
    let inv = desired.tf_pf.inverse()?;
    let filt = match participating(factor_fp) {
        Some(m) => {
            let base = m.tf().mul(&inv)?;
            let (f, _) = pll_filter(&base, opts)?;
            Some((base.mul(&f)?, f))
        }
        None => None,
    };
    let (ref_fp, f) = match filt {
        Some((r, f)) => (Some(roll_off(r, opts.tau_fix)?), Some(f)),
        None => (None, None),
    };
    let ref_vq = match participating(factor_vq) {
        Some(m) => {
            let base = m.tf().mul(&desired.vq_target(opts.tau_aug)?)?;
            let f = match f {
                Some(f) => f,
                None => pll_filter(&base, opts)?.0,
            };
            Some(roll_off(base.mul(&f)?, opts.tau_fix)?)
        }
        None => None,
    };
    Ok((ref_fp, ref_vq))
}

/// Ordered device list sharing one desired behavior.
#[derive(Debug, Clone, PartialEq)]
pub struct Fleet {
    pub devices: Vec<DeviceSpec>,
    pub desired: DesiredBehavior,
    pub opts: DesignOptions,
}

impl Fleet {
    /// Validates the devices and realizes every reference model.
    pub fn new(desired: DesiredBehavior, devices: Vec<DeviceSpec>, opts: DesignOptions) -> Result<Self> {
        if devices.is_empty() {
            return Err(Error::EmptyFleet);
        }
        for (i, d) in devices.iter().enumerate() {
            if devices[..i].iter().any(|o| o.name == d.name) {
                return Err(Error::DuplicateDevice(d.name.clone()));
            }
            for f in [&d.factor_fp, &d.factor_vq].into_iter().flatten() {
                if f.kind == FactorKind::Lpf && f.tau < d.tau_dc {
                    return Err(Error::BandwidthViolation {
                        device: d.name.clone(),
                        tau: f.tau,
                        tau_dc: d.tau_dc,
                    });
                }
            }
        }
        let mut fleet = Fleet { devices, desired, opts };
        fleet.realize()?;
        Ok(fleet)
    }

    /// Re-derives every reference model from the current factors.
    pub fn realize(&mut self) -> Result<()> {
        for d in self.devices.iter_mut() {
            let (pf, vq) = match d.role {
                Role::Forming => {
                    disaggregate_forming(&self.desired, d.factor_fp.as_ref(), d.factor_vq.as_ref(), &self.opts)?
                }
                Role::Following => {
                    disaggregate_following(&self.desired, d.factor_fp.as_ref(), d.factor_vq.as_ref(), &self.opts)?
                }
            };
            d.ref_pf = pf;
            d.ref_vq = vq;
        }
        Ok(())
    }

    pub fn device(&self, name: &str) -> Option<&DeviceSpec> {
        self.devices.iter().find(|d| d.name == name)
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.devices
            .iter()
            .position(|d| d.name == name)
            .ok_or_else(|| Error::UnknownDevice(name.to_string()))
    }

    /// Rebuilds every complement factor on `channel` from the other factors.
    ///
    /// Complement devices share `1 - Σ m` in proportion to their weights.
    pub fn recomplete(&mut self, channel: Channel) -> Result<()> {
        let slot = |d: &DeviceSpec| d.factor(channel).cloned();
        let others: Vec<ParticipationFactor> = self
            .devices
            .iter()
            .filter_map(slot)
            .filter(|f| f.kind != FactorKind::Complement)
            .map(|f| f.with_channel(channel))
            .collect();
        let total_w: f64 = self
            .devices
            .iter()
            .filter_map(slot)
            .filter(|f| f.kind == FactorKind::Complement)
            .map(|f| f.weight)
            .sum();
        if total_w == 0.0 {
            return Ok(());
        }
        for d in self.devices.iter_mut() {
            let f = match channel {
                Channel::Fp | Channel::FpPrime => &mut d.factor_fp,
                Channel::Vq => &mut d.factor_vq,
            };
            if let Some(old) = f.as_ref().filter(|f| f.kind == FactorKind::Complement) {
                let mut comp = complete_weighted(&others, channel, old.weight / total_w)?;
                comp.weight = old.weight;
                comp.channel = old.channel;
                *f = Some(comp);
            }
        }
        Ok(())
    }
}

/// Shape requested for a device before gains are assigned.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ShapeInput {
    Lpf,
    Hpf,
    Bpf { tau_high: f64 },
    Complement,
}

/// Device description as it appears in a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceInput {
    pub name: String,
    pub bus: String,
    pub role: Role,
    pub shape: ShapeInput,
    pub tau: f64,
    /// Fixed active-power DC gain; unset gains follow capacities.
    pub mu: Option<f64>,
    /// MVA.
    pub rating: f64,
    pub tau_dc: f64,
    /// pu; defaults to the rating.
    pub p_capacity: Option<f64>,
}

/// Splits `share` over `weights` proportionally.
pub fn proportional(weights: &[f64], share: f64) -> Result<Vec<f64>> {
    let total: f64 = weights.iter().sum();
    if weights.is_empty() {
        return Ok(Vec::new());
    }
    if !(total > 0.0) {
        return Err(Error::AllCapacitiesZero);
    }
    Ok(weights.iter().map(|w| share * w / total).collect())
}

fn shaped(shape: ShapeInput, tau: f64, mu: f64, channel: Channel) -> Result<Option<ParticipationFactor>> {
    Ok(Some(match shape {
        ShapeInput::Lpf => make_adpf(AdpfKind::Lpf { tau }, mu.clamp(0.0, 1.0), channel)?,
        ShapeInput::Hpf => make_adpf(AdpfKind::Hpf { tau }, 0.0, channel)?,
        ShapeInput::Bpf { tau_high } => make_adpf(AdpfKind::Bpf { tau_low: tau, tau_high }, 0.0, channel)?,
        ShapeInput::Complement => return Ok(None),
    }))
}

/// Assigns DC gains, completes both channels and realizes the reference models.
///
/// Unset active-power gains share what fixed gains leave over, in proportion
/// to `p_capacity`; reactive gains follow `q_capacity` (ratings when every
/// low-pass device is fully loaded). Complement devices split `1 - Σ m` evenly.
pub fn build_fleet(
    desired: DesiredBehavior,
    inputs: &[DeviceInput],
    base_mva: f64,
    opts: DesignOptions,
) -> Result<Fleet> {
    if inputs.is_empty() {
        return Err(Error::EmptyFleet);
    }
    let mut devices: Vec<DeviceSpec> = inputs
        .iter()
        .map(|d| {
            let s = d.rating / base_mva;
            let p = d.p_capacity.unwrap_or(s);
            DeviceSpec {
                name: d.name.clone(),
                bus: d.bus.clone(),
                role: d.role,
                rating: d.rating,
                tau_dc: d.tau_dc,
                p_capacity: p,
                s_rating: s,
                factor_fp: None,
                factor_vq: None,
                ref_pf: None,
                ref_vq: None,
            }
        })
        .collect();
    for d in &devices {
        if !(d.p_capacity >= 0.0 && d.p_capacity <= d.s_rating + 1e-12) {
            return Err(Error::CapacityExceedsRating {
                p_capacity: d.p_capacity,
                s_rating: d.s_rating,
            });
        }
    }
    let lpf: Vec<usize> = (0..inputs.len())
        .filter(|&i| inputs[i].shape == ShapeInput::Lpf)
        .collect();
    let fixed: f64 = lpf.iter().filter_map(|&i| inputs[i].mu).sum();
    let free: Vec<usize> = lpf.iter().copied().filter(|&i| inputs[i].mu.is_none()).collect();
    let free_mu = if free.is_empty() {
        Vec::new()
    } else {
        proportional(
            &free.iter().map(|&i| devices[i].p_capacity).collect::<Vec<_>>(),
            (1.0 - fixed).max(0.0),
        )?
    };
    let q: Vec<f64> = lpf.iter().map(|&i| devices[i].q_capacity()).collect();
    let vq_mu = if q.iter().sum::<f64>() > 0.0 {
        proportional(&q, 1.0)?
    } else {
        proportional(&lpf.iter().map(|&i| devices[i].s_rating).collect::<Vec<_>>(), 1.0)?
    };
    for (k, &i) in lpf.iter().enumerate() {
        let mu = match inputs[i].mu {
            Some(m) => m,
            None => free_mu[free.iter().position(|&j| j == i).unwrap()],
        };
        if !(0.0..=1.0).contains(&mu) {
            return Err(Error::InvalidGain { mu });
        }
        devices[i].factor_fp = shaped(ShapeInput::Lpf, inputs[i].tau, mu, Channel::Fp)?;
        devices[i].factor_vq = shaped(ShapeInput::Lpf, inputs[i].tau, vq_mu[k], Channel::Vq)?;
    }
    for (i, d) in inputs.iter().enumerate() {
        if d.shape != ShapeInput::Lpf {
            devices[i].factor_fp = shaped(d.shape, d.tau, 0.0, Channel::Fp)?;
            devices[i].factor_vq = shaped(d.shape, d.tau, 0.0, Channel::Vq)?;
        }
    }
    let n_comp = inputs.iter().filter(|d| d.shape == ShapeInput::Complement).count();
    if n_comp > 0 {
        for channel in [Channel::Fp, Channel::Vq] {
            let others: Vec<ParticipationFactor> = devices.iter().filter_map(|d| d.factor(channel).cloned()).collect();
            for (i, d) in inputs.iter().enumerate() {
                if d.shape == ShapeInput::Complement {
                    let c = complete_weighted(&others, channel, 1.0 / n_comp as f64)?;
                    match channel {
                        Channel::Vq => devices[i].factor_vq = Some(c),
                        _ => devices[i].factor_fp = Some(c),
                    }
                }
            }
        }
    }
    Fleet::new(desired, devices, opts)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParticipationReport {
    /// Worst `|Σ m_i(jω) - 1|` over the grid.
    pub max_deviation: f64,
    /// `|Σ m_i(0) - 1|`.
    pub dc_residual: f64,
}

pub fn check_participation(fleet: &Fleet, channel: Channel, grid: &[f64]) -> Result<ParticipationReport> {
    let mut factors = Vec::with_capacity(fleet.devices.len());
    for d in &fleet.devices {
        factors.push(d.factor(channel).ok_or_else(|| Error::MissingFactor(d.name.clone()))?);
    }
    let mut worst = 0.0_f64;
    for &w in grid {
        let mut sum = Complex64::new(0.0, 0.0);
        for f in &factors {
            sum += f.eval(w)?;
        }
        worst = worst.max((sum - 1.0).norm());
    }
    let dc: f64 = factors.iter().map(|f| f.dc_gain()).sum();
    Ok(ParticipationReport {
        max_deviation: worst,
        dc_residual: (dc - 1.0).abs(),
    })
}

/// Per-frequency relative aggregation errors.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregationErrors {
    pub omega: Vec<f64>,
    pub freq: Vec<f64>,
    pub volt: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregationReport {
    /// Worst frequency-channel error at or below `1/τ_pll`.
    pub freq_low: f64,
    /// Worst frequency-channel error above `1/τ_pll` (tolerated).
    pub freq_high: f64,
    pub volt_low: f64,
    pub volt_high: f64,
}

fn rel_err(a: Complex64, b: Complex64) -> f64 {
    let d = (a - b).norm();
    if b.norm() == 0.0 {
        if d == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        d / b.norm()
    }
}

pub fn aggregation_errors(fleet: &Fleet, grid: &[f64]) -> Result<AggregationErrors> {
    let mut out = AggregationErrors {
        omega: grid.to_vec(),
        freq: Vec::with_capacity(grid.len()),
        volt: Vec::with_capacity(grid.len()),
    };
    if fleet.devices.is_empty() {
        out.freq = grid.iter().map(|_| f64::INFINITY).collect();
        out.volt = out.freq.clone();
        return Ok(out);
    }
    for d in &fleet.devices {
        let fp_needed = d.participates_fp();
        let vq_needed = d.factor_vq.as_ref().is_some_and(|f| !f.is_zero());
        if (fp_needed && d.ref_pf.is_none()) || (vq_needed && d.ref_vq.is_none()) {
            return Err(Error::UnrealizedDevice(d.name.clone()));
        }
    }
    let vq_target = fleet.desired.vq_target(fleet.opts.tau_aug)?;
    for &w in grid {
        let s = Complex64::new(0.0, w);
        let mut adm = Complex64::new(0.0, 0.0);
        let mut vq = Complex64::new(0.0, 0.0);
        for d in &fleet.devices {
            if let Some(r) = &d.ref_pf {
                let v = r.eval(s)?;
                adm += match d.role {
                    Role::Forming => 1.0 / v,
                    Role::Following => v,
                };
            }
            if let Some(r) = &d.ref_vq {
                vq += r.eval(s)?;
            }
        }
        let target = fleet.desired.tf_pf.eval(s)?;
        let agg = if adm.norm() == 0.0 {
            Complex64::new(f64::INFINITY, 0.0)
        } else {
            1.0 / adm
        };
        out.freq.push(rel_err(agg, target));
        out.volt.push(rel_err(vq, vq_target.eval(s)?));
    }
    Ok(out)
}

pub fn verify_aggregation(fleet: &Fleet, grid: &[f64]) -> Result<AggregationReport> {
    let e = aggregation_errors(fleet, grid)?;
    let split = 1.0 / fleet.opts.tau_pll;
    let mut r = AggregationReport {
        freq_low: 0.0,
        freq_high: 0.0,
        volt_low: 0.0,
        volt_high: 0.0,
    };
    for k in 0..grid.len() {
        if grid[k] <= split {
            r.freq_low = r.freq_low.max(e.freq[k]);
            r.volt_low = r.volt_low.max(e.volt[k]);
        } else {
            r.freq_high = r.freq_high.max(e.freq[k]);
            r.volt_high = r.volt_high.max(e.volt[k]);
        }
    }
    Ok(r)
}

/// Splits every forming device into a forming share `ε` and a following share `1 - ε`.
///
/// The forming copy keeps the original name; the following copy gets a `_gfl` suffix.
/// Zero-rated copies are dropped.
pub fn hybrid_split(fleet: &Fleet, epsilon: f64) -> Result<Fleet> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::InvalidGain { mu: epsilon });
    }
    let mut devices = Vec::new();
    for d in &fleet.devices {
        if d.role != Role::Forming {
            return Err(Error::NotAllForming(d.name.clone()));
        }
        for (share, role, name) in [
            (epsilon, Role::Forming, d.name.clone()),
            (1.0 - epsilon, Role::Following, format!("{}_gfl", d.name)),
        ] {
            if share == 0.0 {
                continue;
            }
            let mut c = d.clone();
            c.name = name;
            c.role = role;
            if share != 1.0 {
                c.rating *= share;
                c.p_capacity *= share;
                c.s_rating *= share;
                c.factor_fp = d.factor_fp.as_ref().map(|f| f.scaled(share));
                c.factor_vq = d.factor_vq.as_ref().map(|f| f.scaled(share));
            }
            devices.push(c);
        }
    }
    Fleet::new(fleet.desired.clone(), devices, fleet.opts)
}
