use riskgrowth::entropic::{
    entropic_utility, entropic_weighted, esscher_tilt, relative_entropy, DiscreteLaw,
};
use riskgrowth::quadrature::gauss_hermite_law;
use riskgrowth::rng::PathRng;

const LADDER: [f64; 8] = [-5.0, -2.0, -1.0, -0.5, -0.2, -0.05, -0.01, 0.0];

fn random_law(rng: &mut PathRng) -> (DiscreteLaw, Vec<f64>) {
    let n = 1 + rng.index(10);
    let atoms: Vec<(Vec<f64>, f64)> = (0..n)
        .map(|i| (vec![i as f64], 0.05 + rng.uniform()))
        .collect();
    let total: f64 = atoms.iter().map(|a| a.1).sum();
    let atoms: Vec<(Vec<f64>, f64)> = atoms.into_iter().map(|(x, p)| (x, p / total)).collect();
    let values = (0..n).map(|_| 6.0 * rng.standard_normal()).collect();
    (DiscreteLaw::from_atoms(&atoms).unwrap(), values)
}

fn random_gamma(rng: &mut PathRng) -> f64 {
    -(0.01 + 4.0 * rng.uniform())
}

#[test]
fn monotone_in_the_values() {
    let mut rng = PathRng::new(11, 0);
    for _ in 0..500 {
        let (law, v) = random_law(&mut rng);
        let bumped: Vec<f64> = v.iter().map(|x| x + rng.uniform()).collect();
        let g = random_gamma(&mut rng);
        assert!(
            entropic_utility(&v, &law, g).unwrap()
                <= entropic_utility(&bumped, &law, g).unwrap() + 1e-12
        );
    }
}

#[test]
fn translation_invariant() {
    let mut rng = PathRng::new(12, 0);
    for _ in 0..500 {
        let (law, v) = random_law(&mut rng);
        let c = 50.0 * rng.standard_normal();
        let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
        let g = random_gamma(&mut rng);
        let d = entropic_utility(&shifted, &law, g).unwrap()
            - entropic_utility(&v, &law, g).unwrap()
            - c;
        assert!(d.abs() <= 1e-10, "{d}");
    }
}

#[test]
fn additive_over_independent_laws() {
    let mut rng = PathRng::new(13, 0);
    for _ in 0..500 {
        let (l1, v1) = random_law(&mut rng);
        let (l2, v2) = random_law(&mut rng);
        let prod = l1.product(&l2).unwrap();
        // product atoms enumerate (i, j) with j fastest
        let sum: Vec<f64> = v1
            .iter()
            .flat_map(|a| v2.iter().map(move |b| a + b))
            .collect();
        let g = random_gamma(&mut rng);
        let lhs = entropic_utility(&sum, &prod, g).unwrap();
        let rhs = entropic_utility(&v1, &l1, g).unwrap() + entropic_utility(&v2, &l2, g).unwrap();
        assert!(
            (lhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()),
            "{lhs} vs {rhs}"
        );
    }
}

#[test]
fn nondecreasing_in_gamma() {
    let mut rng = PathRng::new(14, 0);
    for _ in 0..500 {
        let (law, v) = random_law(&mut rng);
        let vals: Vec<f64> = LADDER
            .iter()
            .map(|&g| entropic_utility(&v, &law, g).unwrap())
            .collect();
        assert!(vals.windows(2).all(|w| w[0] <= w[1] + 1e-12), "{vals:?}");
    }
}

#[test]
fn dual_representation_at_the_esscher_tilt() {
    let mut rng = PathRng::new(15, 0);
    for _ in 0..500 {
        let (law, v) = random_law(&mut rng);
        let g = random_gamma(&mut rng);
        let mu = entropic_utility(&v, &law, g).unwrap();
        let score: Vec<f64> = v.iter().map(|x| g * x).collect();
        let q = esscher_tilt(&score, &law).unwrap();
        let dual = |qw: &[f64]| {
            let e: f64 = qw.iter().zip(&v).map(|(a, b)| a * b).sum();
            e - relative_entropy(qw, law.weights()).unwrap() / g
        };
        assert!(
            (dual(&q.weights) - mu).abs() <= 1e-9,
            "gap {}",
            dual(&q.weights) - mu
        );
        for _ in 0..20 {
            let raw: Vec<f64> = (0..law.len()).map(|_| rng.uniform()).collect();
            let total: f64 = raw.iter().sum();
            let alt: Vec<f64> = raw.iter().map(|r| r / total).collect();
            assert!(dual(&alt) >= mu - 1e-12);
        }
    }
}

#[test]
fn gaussian_closed_form_by_quadrature() {
    let law = gauss_hermite_law(1, 32).unwrap();
    for &(m, s) in &[(0.0, 1.0), (0.3, 0.5), (-1.0, 0.2), (2.0, 0.8)] {
        let v: Vec<f64> = law.points().map(|w| m + s * w[0]).collect();
        for i in 0..=30 {
            let g = -0.01 - (3.0 - 0.01) * i as f64 / 30.0;
            let got = entropic_utility(&v, &law, g).unwrap();
            assert!(
                (got - (m + g * s * s / 2.0)).abs() <= 1e-6,
                "m {m} s {s} g {g}: {got}"
            );
        }
    }
}

#[test]
fn small_gamma_approaches_the_mean() {
    let mut rng = PathRng::new(16, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let (law, v) = random_law(&mut rng);
        let mean = entropic_weighted(&v, law.weights(), 0.0);
        let var = law
            .weights()
            .iter()
            .zip(&v)
            .map(|(p, x)| p * (x - mean).powi(2))
            .sum::<f64>();
        if var < 1e-6 {
            continue;
        }
        for g in [-1e-2, -1e-3, -1e-4] {
            let gap = (entropic_weighted(&v, law.weights(), g) - mean).abs();
            worst = worst.max(gap / (g.abs() * var));
        }
    }
    // the first-order coefficient is one half of the variance
    assert!(worst <= 0.5 + 0.2, "fitted constant {worst}");
}
