//! Video verdicts from sequence probabilities under every voting scheme.
//!
//! ```text
//! cargo run --example voting
//! ```

use gazesig::{aggregate, Scheme};

fn main() {
    let cases: [(&str, &[f64]); 4] = [
        ("one confident fake", &[0.9, 0.4, 0.4]),
        ("near-certain fake", &[0.999, 0.2, 0.3]),
        ("undecided", &[0.5, 0.5, 0.5]),
        ("clearly real", &[0.1, 0.05, 0.3, 0.2]),
    ];
    print!("{:<20}", "probabilities");
    for scheme in Scheme::ALL {
        print!(" {:>18}", scheme.as_str());
    }
    println!();
    for (name, probs) in cases {
        print!("{name:<20}");
        for scheme in Scheme::ALL {
            let v = aggregate(name, probs, scheme).unwrap();
            print!(" {:>18}", format!("{} ({:+.3})", v.label.as_str(), v.score));
        }
        println!();
    }
}
