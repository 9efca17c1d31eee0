//! Level-1 (Shichman-Hodges) MOSFET equations.

use crate::netlist::{ModelCard, ModelKind};

pub const DEFAULT_KP: f64 = 2e-5;
pub const DEFAULT_VTO_N: f64 = 1.0;
pub const DEFAULT_VTO_P: f64 = -1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Level1 {
    pub polarity: ModelKind,
    pub vto: f64,
    pub kp: f64,
    pub lambda: f64,
}

impl Level1 {
    pub fn from_card(card: &ModelCard) -> Self {
        let default_vto = if card.kind == ModelKind::Pmos {
            DEFAULT_VTO_P
        } else {
            DEFAULT_VTO_N
        };
        Level1 {
            polarity: card.kind,
            vto: card.param("VTO").unwrap_or(default_vto),
            kp: card.param("KP").unwrap_or(DEFAULT_KP),
            lambda: card.param("LAMBDA").unwrap_or(0.0),
        }
    }

    /// Threshold magnitude in the NMOS-normalized frame.
    pub fn vth(&self) -> f64 {
        match self.polarity {
            ModelKind::Pmos => -self.vto,
            _ => self.vto,
        }
    }
}

/// Drain current and small-signal conductances of an n-channel device with
/// `vds >= 0`, transconductance factor `beta = KP*(W/L)*m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Operating {
    pub id: f64,
    pub gm: f64,
    pub gds: f64,
}

pub fn square_law(beta: f64, vth: f64, lambda: f64, vgs: f64, vds: f64) -> Operating {
    let vov = vgs - vth;
    if vov <= 0.0 {
        return Operating {
            id: 0.0,
            gm: 0.0,
            gds: 0.0,
        };
    }
    let clm = 1.0 + lambda * vds;
    if vds < vov {
        let core = vov * vds - vds * vds / 2.0;
        Operating {
            id: beta * core * clm,
            gm: beta * vds * clm,
            gds: beta * ((vov - vds) * clm + lambda * core),
        }
    } else {
        let core = vov * vov / 2.0;
        Operating {
            id: beta * core * clm,
            gm: beta * vov * clm,
            gds: beta * core * lambda,
        }
    }
}

/// Current into the drain terminal and its partial derivatives with respect
/// to (vd, vg, vs). Handles drain/source swap and PMOS sign reflection.
pub fn terminal_current(model: &Level1, beta: f64, vd: f64, vg: f64, vs: f64) -> (f64, [f64; 3]) {
    let sign = if model.polarity == ModelKind::Pmos { -1.0 } else { 1.0 };
    let (d, g, s) = (sign * vd, sign * vg, sign * vs);
    let vth = model.vth();
    let (id, grad) = if d >= s {
        let op = square_law(beta, vth, model.lambda, g - s, d - s);
        (op.id, [op.gds, op.gm, -op.gm - op.gds])
    } else {
        let op = square_law(beta, vth, model.lambda, g - d, s - d);
        (-op.id, [op.gm + op.gds, -op.gm, -op.gds])
    };
    // I_p(v) = -I_n(-v): value flips sign, derivatives do not.
    (sign * id, grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn saturation_current_hand_value() {
        // KP=2e-5, W/L=2, VTO=1, Vgs=3, Vds=5 -> (2e-5/2)*2*(3-1)^2
        let op = square_law(2e-5 * 2.0, 1.0, 0.0, 3.0, 5.0);
        assert!((op.id - 8.0e-5).abs() <= 1e-9 * 8.0e-5);
    }

    #[test]
    fn cutoff() {
        let op = square_law(1e-4, 1.0, 0.0, 0.5, 1.0);
        assert_eq!(op.id, 0.0);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let model = Level1 {
            polarity: ModelKind::Nmos,
            vto: 0.7,
            kp: 1e-4,
            lambda: 0.05,
        };
        for &(vd, vg, vs) in &[(1.0, 1.5, 0.0), (0.2, 1.5, 0.0), (0.0, 1.5, 0.6), (2.0, 0.3, 0.0)] {
            let (_, grad) = terminal_current(&model, 2e-4, vd, vg, vs);
            let h = 1e-6;
            let mut v = [vd, vg, vs];
            for k in 0..3 {
                v[k] += h;
                let plus = terminal_current(&model, 2e-4, v[0], v[1], v[2]).0;
                v[k] -= 2.0 * h;
                let minus = terminal_current(&model, 2e-4, v[0], v[1], v[2]).0;
                v[k] += h;
                let fd = (plus - minus) / (2.0 * h);
                assert!((fd - grad[k]).abs() < 1e-8, "k={k} fd={fd} an={}", grad[k]);
            }
        }
    }

    #[test]
    fn pmos_reflection() {
        let n = Level1 {
            polarity: ModelKind::Nmos,
            vto: 0.7,
            kp: 1e-4,
            lambda: 0.0,
        };
        let p = Level1 {
            polarity: ModelKind::Pmos,
            vto: -0.7,
            ..n
        };
        let (i_n, _) = terminal_current(&n, 1e-4, 1.0, 1.8, 0.0);
        let (i_p, _) = terminal_current(&p, 1e-4, -1.0, -1.8, 0.0);
        assert_eq!(i_p, -i_n);
        assert!(i_n > 0.0);
    }
}
