//! Scratch harness for tuning the shipped example configurations.

use sea_hopper::analysis::{
    detect_touchdowns, hop_periodicity, integrated_current, max_spring_deflection, peak_current,
    settling_time, Window,
};
use sea_hopper::experiments::{run_drop_test, ExperimentConfig, Protocol};
use sea_hopper::control::PdGains;
use sea_hopper::robot::{Joint, JointMap};
use sea_hopper::sea::SpringMode;

fn landing_config(active: bool) -> ExperimentConfig {
    let mut c = ExperimentConfig::defaults(Protocol::DropTest);
    c.duration_s = 1.5;
    c.initial_pose_deg = JointMap { hip: -20.0, knee: 45.0, ankle: -15.0 };
    c.controller.targets_deg = c.initial_pose_deg;
    c.controller.gains = JointMap {
        hip: PdGains { kp_a_per_deg: 0.08, kd_a_per_dps: 0.002 },
        knee: PdGains { kp_a_per_deg: 0.03, kd_a_per_dps: 0.0005 },
        ankle: PdGains { kp_a_per_deg: 0.05, kd_a_per_dps: 0.001 },
    };
    c.spring_mode = if active {
        JointMap { hip: SpringMode::Locked, knee: SpringMode::Active, ankle: SpringMode::Active }
    } else {
        JointMap::uniform(SpringMode::Locked)
    };
    c
}

fn hopping_config() -> ExperimentConfig {
    let mut c = ExperimentConfig::defaults(Protocol::DropTest);
    c.controller.feedback = sea_hopper::control::FeedbackSource::JointSensor;
    c.duration_s = 4.0;
    c.initial_pose_deg = JointMap { hip: -10.0, knee: 30.0, ankle: -50.0 };
    c.controller.targets_deg = c.initial_pose_deg;
    c.controller.gains = JointMap {
        hip: PdGains { kp_a_per_deg: 0.08, kd_a_per_dps: 0.002 },
        knee: PdGains { kp_a_per_deg: 0.05, kd_a_per_dps: 0.0005 },
        ankle: PdGains { kp_a_per_deg: 0.30, kd_a_per_dps: 0.001 },
    };
    c.spring_mode =
        JointMap { hip: SpringMode::Locked, knee: SpringMode::Active, ankle: SpringMode::Active };
    c
}

fn landing_report(label: &str, c: &ExperimentConfig) -> (f64, f64, Option<f64>, f64) {
    let trace = run_drop_test(c).unwrap();
    let tds = detect_touchdowns(&trace, 0.1);
    let td = tds.first().copied().unwrap_or(f64::NAN);
    let w = Window { t0_s: td, t1_s: td + 0.8 };
    let peak = peak_current(&trace, Joint::Knee, Some(w)).unwrap();
    let integ = integrated_current(&trace, Joint::Knee, Some(w)).unwrap();
    let defl = max_spring_deflection(&trace, Joint::Knee, Some(w)).unwrap();
    let settle = settling_time(&trace, Joint::Knee, 2.0, 0.2).unwrap().as_seconds();
    let mut extremes = String::new();
    for j in Joint::ALL {
        let lo = trace.joints[j].q_deg.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = trace.joints[j].q_deg.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        extremes.push_str(&format!(" {j}[{lo:.1},{hi:.1}]"));
    }
    println!(
        "{label}: td={td:.3}s peakI={peak:.0}mA int={integ:.3}A·s defl={defl:.1}° settle={settle:?} range:{extremes}"
    );
    (peak, integ, settle, defl)
}

fn hop_score(
    knee_pose: f64,
    ankle_pose: f64,
    knee_kp: f64,
    ankle_kp: f64,
    ankle_kd: f64,
) -> Option<(usize, f64, f64)> {
    let mut c = hopping_config();
    c.initial_pose_deg.knee = knee_pose;
    c.initial_pose_deg.ankle = ankle_pose;
    c.controller.targets_deg = c.initial_pose_deg;
    c.controller.gains.knee.kp_a_per_deg = knee_kp;
    c.controller.gains.ankle.kp_a_per_deg = ankle_kp;
    c.controller.gains.ankle.kd_a_per_dps = ankle_kd;
    let trace = run_drop_test(&c).ok()?;
    let tds = detect_touchdowns(&trace, 0.1);
    let rep = hop_periodicity(&trace)
        .map(|s| {
            s.pose_repeatability_deg
                .hip
                .max(s.pose_repeatability_deg.knee)
                .max(s.pose_repeatability_deg.ankle)
        })
        .unwrap_or(f64::NAN);
    let worst_limit = Joint::ALL
        .iter()
        .map(|&j| {
            let [lo, hi] = c.robot.joint_limits_deg[j];
            trace.joints[j]
                .q_deg
                .iter()
                .map(|&q| (lo - q).max(q - hi).max(0.0))
                .fold(0.0f64, f64::max)
        })
        .fold(0.0f64, f64::max);
    Some((tds.len(), rep, worst_limit))
}

fn grid_search() {
    println!("== hopping grid ==");
    for knee_pose in [20.0, 30.0, 45.0] {
        for ankle_pose in [-35.0, -50.0, -65.0] {
            for knee_kp in [0.03, 0.08, 0.15] {
                for ankle_kp in [0.2, 0.4, 0.8] {
                    for ankle_kd in [0.0005, 0.002] {
                        if let Some((tds, rep, lim)) =
                            hop_score(knee_pose, ankle_pose, knee_kp, ankle_kp, ankle_kd)
                        {
                            if tds >= 3 {
                                println!(
                                    "kp_k={knee_kp} kp_a={ankle_kp} kd_a={ankle_kd} pose_k={knee_pose} pose_a={ankle_pose}: tds={tds} rep={rep:.2} lim_excess={lim:.2}"
                                );
                            }
                        }
                    }
                }
            }
        }
    }
}

fn inspect(args: &[String]) {
    // inspect knee_pose ankle_pose knee_kp ankle_kp ankle_kd [init_hip init_knee init_ankle] [duration]
    let f = |i: usize, d: f64| args.get(i).and_then(|s| s.parse().ok()).unwrap_or(d);
    let mut c = hopping_config();
    c.initial_pose_deg.knee = f(0, 20.0);
    c.initial_pose_deg.ankle = f(1, -65.0);
    c.controller.targets_deg = c.initial_pose_deg;
    c.controller.gains.knee.kp_a_per_deg = f(2, 0.03);
    c.controller.gains.ankle.kp_a_per_deg = f(3, 0.4);
    c.controller.gains.ankle.kd_a_per_dps = f(4, 0.0005);
    if args.len() >= 8 {
        c.initial_pose_deg = JointMap { hip: f(5, -10.0), knee: f(6, 20.0), ankle: f(7, -65.0) };
    }
    c.duration_s = f(8, 4.0);
    let trace = run_drop_test(&c).unwrap();
    let tds = detect_touchdowns(&trace, 0.1);
    println!("touchdowns: {tds:?}");
    if let Ok(stats) = hop_periodicity(&trace) {
        for (t, pose) in stats.touchdown_times_s.iter().zip(&stats.touchdown_poses_deg) {
            println!(
                "  t={t:.3} pose: hip {:.2} knee {:.2} ankle {:.2}",
                pose.hip, pose.knee, pose.ankle
            );
        }
        println!(
            "rep: hip {:.2} knee {:.2} ankle {:.2}; periods {:?}; apex {:?}",
            stats.pose_repeatability_deg.hip,
            stats.pose_repeatability_deg.knee,
            stats.pose_repeatability_deg.ankle,
            stats.periods_s,
            stats.apex_heights_m
        );
    }
}

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.first().map(String::as_str) == Some("grid") {
        grid_search();
        return;
    }
    if args.first().map(String::as_str) == Some("inspect") {
        inspect(&args[1..]);
        return;
    }
    println!("== landing ==");
    let locked = landing_report("locked", &landing_config(false));
    let active = landing_report("active", &landing_config(true));
    println!(
        "ratio peak = {:.3} (need <= 0.8), defl {:.1} in 10..30, settle {:?} > {:?}, integ {:.3} > {:.3}",
        active.0.abs() / locked.0.abs(),
        active.3,
        active.2,
        locked.2,
        active.1,
        locked.1
    );

    println!("== hopping ==");
    let c = hopping_config();
    let trace = run_drop_test(&c).unwrap();
    let tds = detect_touchdowns(&trace, 0.1);
    println!("touchdowns: {} at {:?}", tds.len(), tds);
    match hop_periodicity(&trace) {
        Ok(stats) => {
            println!(
                "repeatability: hip {:.2} knee {:.2} ankle {:.2}; periods {:?}; apex {:?}",
                stats.pose_repeatability_deg.hip,
                stats.pose_repeatability_deg.knee,
                stats.pose_repeatability_deg.ankle,
                stats.periods_s,
                stats.apex_heights_m
            );
        }
        Err(e) => println!("no periodicity: {e}"),
    }
    for j in Joint::ALL {
        let lo = trace.joints[j].q_deg.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = trace.joints[j].q_deg.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        println!("  {j} range [{lo:.1}, {hi:.1}] limits {:?}", c.robot.joint_limits_deg[j]);
    }
    let zmax = trace.z_m.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let zmin = trace.z_m.iter().cloned().fold(f64::INFINITY, f64::min);
    println!("  z range [{zmin:.4}, {zmax:.4}]");
}
