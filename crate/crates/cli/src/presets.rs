//! Named experiment settings, one per acceptance criterion that runs a flow.

use crate::error::{usage, CliResult};
use crate::settings::Settings;

#[derive(Debug, Clone, Copy)]
pub struct Preset {
    pub name: &'static str,
    /// Acceptance criteria this preset feeds.
    pub criteria: &'static [u8],
    pub summary: &'static str,
    /// Subcommand the preset runs.
    pub command: &'static str,
    pub settings: &'static str,
}

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "quadratic-flow",
        command: "flow",
        criteria: &[3, 8],
        summary: "physical flow of 1/2 x^T diag(0.5, 0.3) x to t = 1 against the exact solution",
        settings: "diag = 0.5,0.3\nradius = 8\npoints = 129\nend_time = 1\nclosure = frozen\n",
    },
    Preset {
        name: "sign-flip-expander",
        command: "make-expander",
        criteria: &[4, 5, 8, 11, 12],
        summary: "expander of the sign-flip cone diag(+-0.5, 0.3) by rescaled-flow relaxation",
        settings: "sign_flip = 0.5,0.3\nradius = 8\npoints = 129\ndelta = 0.5\nend_time = 20\nresidual_tol = 1e-4\n",
    },
    Preset {
        name: "cone-bump-flow",
        command: "flow",
        criteria: &[6, 8, 9],
        summary: "physical flow from the sign-flip cone plus a bump, snapshots at t = 1, 2, 4, 8, 16",
        settings: "sign_flip = 0.5,0.3\nbump = 0,0,0.05,1\nradius = 24\npoints = 193\ndelta = 0.4\n\
                   end_time = 16\nsnapshot_times = 1,2,4,8,16\n",
    },
    Preset {
        name: "shrinker-probe",
        command: "probe-shrinker",
        criteria: &[7, 8],
        summary: "normalized shrinker flow from the quadratic shrinker plus a bump to s = 5",
        settings: "diag = 0.5,0.3\nbump = 0,0,0.01,1\nradius = 4.5\npoints = 73\ndelta = 0.45\n\
                   end_time = 5\nsnapshot_times = 1,2,3,4,5\n",
    },
    Preset {
        name: "translator",
        command: "check-translator",
        criteria: &[10],
        summary: "translating solution of 1/2 x^T diag(0.5, 0.3) x with a = (1, 0), b = Aa, c = G(A)",
        settings: "diag = 0.5,0.3\nradius = 8\npoints = 129\nend_time = 1\nclosure = frozen\na = 1,0\n",
    },
    Preset {
        name: "smooth-refinement",
        command: "convergence-study",
        criteria: &[12],
        summary: "physical flow from a quadratic plus a bump on h-halving grids",
        settings: "diag = 0.5,0.3\nbump = 0,0,0.05,0.75\nradius = 4\npoints = 33\nend_time = 0.25\nclosure = frozen\n",
    },
];

pub fn find(name: &str) -> CliResult<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name).ok_or_else(|| {
        let names: Vec<&str> = PRESETS.iter().map(|p| p.name).collect();
        usage(format!("unknown preset '{name}'; known: {}", names.join(", ")))
    })
}

impl Preset {
    pub fn load(&self) -> Settings {
        let mut s = Settings {
            run_id: self.name.to_string(),
            ..Settings::default()
        };
        s.apply_text(self.settings, self.name).expect("preset settings parse");
        s
    }
}
