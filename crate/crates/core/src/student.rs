//! Synthetic student-performance records.
//!
//! Rows follow the column layout and value ranges of the UCI Portuguese-course
//! student table (649 students, 33 columns) so the shipped schema applies to
//! either file unchanged. Lifestyle treatments are assigned from family
//! background, sex and age, and the same background also moves the final
//! grade, so naive models see confounded treatment effects.

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::seed;

pub const ROWS: usize = 649;
pub const SEED: u64 = 20_190_101;

pub const COLUMNS: [&str; 33] = [
    "school",
    "sex",
    "age",
    "address",
    "famsize",
    "Pstatus",
    "Medu",
    "Fedu",
    "Mjob",
    "Fjob",
    "reason",
    "guardian",
    "traveltime",
    "studytime",
    "failures",
    "schoolsup",
    "famsup",
    "paid",
    "activities",
    "nursery",
    "higher",
    "internet",
    "romantic",
    "famrel",
    "freetime",
    "goout",
    "Dalc",
    "Walc",
    "health",
    "absences",
    "G1",
    "G2",
    "G3",
];

const JOBS: [&str; 5] = ["teacher", "health", "services", "at_home", "other"];
const REASONS: [&str; 4] = ["home", "reputation", "course", "other"];
const GUARDIANS: [&str; 3] = ["mother", "father", "other"];

#[derive(Debug, Clone, PartialEq)]
enum Cell {
    Text(&'static str),
    Int(i64),
}

struct Sampler {
    rng: ChaCha8Rng,
    unit: Normal<f64>,
}

impl Sampler {
    fn normal(&mut self, sd: f64) -> f64 {
        sd * self.unit.sample(&mut self.rng)
    }

    fn bernoulli(&mut self, logit: f64) -> bool {
        self.rng.random::<f64>() < 1.0 / (1.0 + (-logit).exp())
    }

    fn yes_no(&mut self, logit: f64) -> Cell {
        Cell::Text(if self.bernoulli(logit) { "yes" } else { "no" })
    }

    fn pick<T: Copy>(&mut self, items: &[T], weights: &[f64]) -> T {
        let w = WeightedIndex::new(weights).expect("positive weights");
        items[w.sample(&mut self.rng)]
    }

    fn ordinal(&mut self, centre: f64, sd: f64, lo: i64, hi: i64) -> i64 {
        ((centre + self.normal(sd)).round() as i64).clamp(lo, hi)
    }
}

fn job(s: &mut Sampler, edu: i64) -> &'static str {
    let e = edu as f64;
    let w = [0.05 + 0.08 * e, 0.04 + 0.03 * e, 0.25, (0.35 - 0.07 * e).max(0.03), 0.35];
    s.pick(&JOBS, &w)
}

fn row(s: &mut Sampler) -> Vec<Cell> {
    let ses = s.normal(1.0);
    let gp_school = s.bernoulli(0.6);
    let female = s.bernoulli(0.36);
    let age = s.pick(&[15i64, 16, 17, 18, 19, 20, 21, 22], &[0.17, 0.27, 0.28, 0.21, 0.05, 0.01, 0.005, 0.005]);
    let urban = s.bernoulli(if gp_school { 1.4 } else { -0.2 } + 0.3 * ses);
    let big_family = s.bernoulli(0.85);
    let together = s.bernoulli(2.0);
    let medu = s.ordinal(2.5 + 1.1 * ses, 0.6, 0, 4);
    let fedu = s.ordinal(2.3 + 0.9 * ses, 0.7, 0, 4);
    let mjob = job(s, medu);
    let fjob = job(s, fedu);
    let reason = s.pick(&REASONS, &[0.23, 0.22, 0.44, 0.11]);
    let guardian = s.pick(&GUARDIANS, &[0.70, 0.24, 0.06]);
    let traveltime = s.ordinal(if urban { 1.3 } else { 2.0 }, 0.6, 1, 4);
    let nursery = s.yes_no(1.3 + 0.2 * ses);

    let a = (age - 16) as f64;
    let sex = if female { 1.0 } else { -1.0 };
    let drive = 0.35 * ses + 0.3 * sex + 0.15 * (medu as f64 - 2.5) + s.normal(0.6);

    let studytime = s.ordinal(1.9 + 0.6 * drive + 0.25 * sex, 0.45, 1, 4);
    let paid_b = s.bernoulli(-2.6 + 0.7 * ses + 0.3 * drive);
    let goout = s.ordinal(3.1 - 0.35 * drive - 0.25 * sex + 0.2 * a + if urban { 0.2 } else { -0.2 }, 0.9, 1, 5);
    let dalc = s.ordinal(1.4 - 0.45 * sex - 0.3 * drive + 0.15 * a, 0.6, 1, 5);
    let walc = s.ordinal(2.2 - 0.6 * sex - 0.35 * drive + 0.25 * a + if urban { 0.15 } else { -0.15 }, 0.9, 1, 5);
    let absences = ((1.1 + 0.15 * a - 0.3 * drive + s.normal(0.7)).exp() - 1.5).round().clamp(0.0, 32.0) as i64;

    let st = studytime as f64 - 2.0;
    let failures = ((-1.9 - 0.7 * drive + 0.4 * a - 0.3 * st + 0.25 * (dalc as f64 - 1.5) + s.normal(0.7)).exp())
        .floor()
        .clamp(0.0, 3.0) as i64;
    let schoolsup = s.yes_no(-2.2 - 0.3 * a - 0.2 * ses);
    let famsup = s.yes_no(0.4 + 0.4 * ses + 0.2 * st);
    let activities = s.yes_no(0.2 * drive - 0.1 * (goout as f64 - 3.0));
    let higher_b = s.bernoulli(3.0 + 0.9 * drive + 0.5 * st - 0.9 * failures as f64 - 0.3 * (dalc as f64 - 1.5));
    let internet = s.yes_no(1.0 + 0.7 * ses + if urban { 0.8 } else { 0.0 });
    let romantic = s.yes_no(-0.6 + 0.25 * a + 0.2 * (goout as f64 - 3.0));
    let famrel = s.ordinal(4.0 + 0.2 * drive - 0.15 * (walc as f64 - 2.0), 0.9, 1, 5);
    let freetime = s.ordinal(3.2 - 0.3 * st + 0.3 * (goout as f64 - 3.0), 0.9, 1, 5);
    let health = s.ordinal(3.5 - 0.3 * sex, 1.4, 1, 5);

    let grade = 11.6 + 0.6 * ses + 0.9 * drive + 0.7 * st + if paid_b { 0.4 } else { 0.0 }
        - 0.35 * (goout as f64 - 2.5).powi(2)
        - 0.6 * (dalc as f64 - 1.5)
        - 0.3 * (walc as f64 - 2.3)
        - 0.07 * absences as f64
        - 1.4 * failures as f64
        + if higher_b { 1.0 } else { -1.0 }
        + if gp_school { 0.4 } else { -0.4 }
        + s.normal(1.8);
    let g3 = grade.round().clamp(0.0, 20.0) as i64;
    let g2 = (grade + s.normal(0.9)).round().clamp(0.0, 20.0) as i64;
    let g1 = (grade + s.normal(1.3)).round().clamp(0.0, 20.0) as i64;

    let flag = |b: bool, yes: &'static str, no: &'static str| Cell::Text(if b { yes } else { no });
    vec![
        flag(gp_school, "GP", "MS"),
        flag(female, "F", "M"),
        Cell::Int(age),
        flag(urban, "U", "R"),
        flag(big_family, "GT3", "LE3"),
        flag(together, "T", "A"),
        Cell::Int(medu),
        Cell::Int(fedu),
        Cell::Text(mjob),
        Cell::Text(fjob),
        Cell::Text(reason),
        Cell::Text(guardian),
        Cell::Int(traveltime),
        Cell::Int(studytime),
        Cell::Int(failures),
        schoolsup,
        famsup,
        flag(paid_b, "yes", "no"),
        activities,
        nursery,
        flag(higher_b, "yes", "no"),
        internet,
        romantic,
        Cell::Int(famrel),
        Cell::Int(freetime),
        Cell::Int(goout),
        Cell::Int(dalc),
        Cell::Int(walc),
        Cell::Int(health),
        Cell::Int(absences),
        Cell::Int(g1),
        Cell::Int(g2),
        Cell::Int(g3),
    ]
}

/// Comma-separated table with a header row; text fields are quoted.
pub fn generate_csv(rows: usize, seed: u64) -> String {
    let mut s = Sampler { rng: seed::rng(seed::derive(seed, "student")), unit: Normal::new(0.0, 1.0).unwrap() };
    let mut w = csv::WriterBuilder::new().quote_style(csv::QuoteStyle::NonNumeric).from_writer(Vec::new());
    w.write_record(COLUMNS).expect("in-memory write");
    for _ in 0..rows {
        let fields: Vec<String> = row(&mut s)
            .into_iter()
            .map(|c| match c {
                Cell::Text(t) => t.to_string(),
                Cell::Int(v) => v.to_string(),
            })
            .collect();
        w.write_record(&fields).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("ascii")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_and_ranges() {
        let text = generate_csv(200, 3);
        let mut r = csv::Reader::from_reader(text.as_bytes());
        assert_eq!(r.headers().unwrap().len(), 33);
        let mut n = 0;
        for rec in r.records() {
            let rec = rec.unwrap();
            let g3: i64 = rec[32].parse().unwrap();
            let abs: i64 = rec[29].parse().unwrap();
            let dalc: i64 = rec[26].parse().unwrap();
            assert!((0..=20).contains(&g3));
            assert!((0..=32).contains(&abs));
            assert!((1..=5).contains(&dalc));
            n += 1;
        }
        assert_eq!(n, 200);
        assert_eq!(text, generate_csv(200, 3));
        assert_ne!(text, generate_csv(200, 4));
    }
}
