use skewfit::data::{apply_normalizer, fit_normalizer, generate_synthetic, split, SyntheticSetting};
use skewfit::fwlr::{fit_fwlr, predict, FwlrConfig};
use skewfit::glm;
use skewfit::metrics;

fn main() {
    let trials = 50u64;
    for setting_id in [1u8, 2, 5] {
        let setting = SyntheticSetting::by_id(setting_id).unwrap();
        for lambda_beta in [0.5, 1.0, 2.0] {
            let (mut f_prop, mut f_plain) = (vec![], vec![]);
            let mut wins = 0;
            for t in 0..trials {
                let data = generate_synthetic(&setting, 1000, 40_000 + t).unwrap();
                let pair = split(&data, 0.7, t).unwrap();
                let stats = fit_normalizer(&pair.train).unwrap();
                let train = apply_normalizer(&stats, &pair.train).unwrap();
                let test = apply_normalizer(&stats, &pair.test).unwrap();
                let fm = |params: &glm::ModelParams| {
                    metrics::f_measure(
                        &metrics::confusion(&predict(params, &test).unwrap(), 0.5).unwrap(),
                    )
                    .value
                };
                let plain = glm::fit(&train, lambda_beta, None, &Default::default(), true).unwrap();
                let fit = fit_fwlr(
                    &train,
                    &FwlrConfig {
                        lambda_beta,
                        reselect_ratio_each_iteration: false,
                        ratio_folds: 2,
                        max_outer_iterations: 12,
                        seed: t,
                        ..Default::default()
                    },
                )
                .unwrap();
                let (fp, fl) = (fm(&fit.params), fm(&plain.params));
                f_prop.push(fp);
                f_plain.push(fl);
                if fp > fl {
                    wins += 1;
                }
            }
            let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
            println!(
                "setting {setting_id} lambda {lambda_beta}: F prop {:.4} vs plain {:.4} (gap {:+.4}, prop wins {wins}/{trials})",
                mean(&f_prop),
                mean(&f_plain),
                mean(&f_prop) - mean(&f_plain)
            );
        }
    }
}
