//! Regularized partial-correlation networks of item responses, their
//! communities, stability and between-group invariance.

mod ega;
mod glasso;
mod invariance;
mod sim;
mod walktrap;

pub use ega::{
    align_to_reference, boot_ega, ega, BootOptions, EgaMethod, EgaOptions, EgaResult, Removal, Resampling,
    StabilityReport, StabilityRound,
};
pub use glasso::{
    correlation_matrix, ebic_select, glasso, lambda_path, EbicOptions, GaussianGraphModel, GlassoOptions, ItemData,
};
pub use invariance::{metric_invariance, network_loadings, InvarianceOptions, InvarianceReport, InvarianceRow};
pub use sim::{block_loadings, simulate_factor_data};
pub use walktrap::{abs_weight_graph, walktrap, walktrap_graph};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::WeightedGraph;
    use crate::stats::RngStream;
    use crate::Error;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn names(p: usize) -> Vec<String> {
        (0..p).map(|i| format!("v{i}")).collect()
    }

    fn tight() -> GlassoOptions {
        GlassoOptions {
            tol: 1e-12,
            max_sweeps: 10_000,
        }
    }

    fn fast_ebic() -> EbicOptions {
        EbicOptions {
            n_lambda: 30,
            ..Default::default()
        }
    }

    fn model_from(pcor: Vec<Vec<f64>>) -> GaussianGraphModel {
        GaussianGraphModel {
            variables: names(pcor.len()),
            partial_correlations: pcor,
            lambda: 0.0,
            ebic: None,
            n_obs: None,
            sweeps: 0,
        }
    }

    fn dense_pcor(s: &DMatrix<f64>) -> DMatrix<f64> {
        let k = s.clone().try_inverse().unwrap();
        DMatrix::from_fn(s.nrows(), s.ncols(), |i, j| {
            if i == j {
                0.0
            } else {
                -k[(i, j)] / (k[(i, i)] * k[(j, j)]).sqrt()
            }
        })
    }

    #[test]
    fn identity_gives_empty_network() {
        for lambda in [0.0, 0.1, 1.0] {
            let m = glasso(&DMatrix::identity(4, 4), &names(4), lambda, &GlassoOptions::default()).unwrap();
            assert_eq!(m.n_edges(), 0);
        }
    }

    #[test]
    fn two_variables_closed_form() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        let m = glasso(&s, &names(2), 0.0, &tight()).unwrap();
        assert_abs_diff_eq!(m.pcor(0, 1), 0.5, epsilon = 1e-9);
        assert_eq!(m.pcor(0, 1), m.pcor(1, 0));
    }

    #[test]
    fn lambda_at_max_offdiagonal_empties_network() {
        let s = DMatrix::from_row_slice(3, 3, &[1.0, 0.4, -0.3, 0.4, 1.0, 0.2, -0.3, 0.2, 1.0]);
        let m = glasso(&s, &names(3), 0.4, &tight()).unwrap();
        assert_eq!(m.n_edges(), 0);
        let dense = dense_pcor(&s);
        let m0 = glasso(&s, &names(3), 0.0, &tight()).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(m0.pcor(i, j), dense[(i, j)], epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn singular_and_indefinite_inputs() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(glasso(&s, &names(2), 0.1, &tight()), Err(Error::Conditioning(_))));
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(glasso(&s, &names(2), 0.1, &tight()), Err(Error::Conditioning(_))));
        let data = ItemData::new(
            names(3),
            (0..50).map(|i| {
                let x = (i as f64 * 0.37).sin();
                vec![x, x, (i as f64 * 1.3).cos()]
            }).collect(),
        )
        .unwrap();
        assert!(matches!(ebic_select(&data, None, &fast_ebic()), Err(Error::Conditioning(_))));
    }

    #[test]
    fn non_convergence_reports_residual() {
        let s = DMatrix::from_row_slice(3, 3, &[1.0, 0.6, 0.5, 0.6, 1.0, 0.4, 0.5, 0.4, 1.0]);
        let opts = GlassoOptions {
            tol: 1e-15,
            max_sweeps: 1,
        };
        match glasso(&s, &names(3), 0.01, &opts) {
            Err(Error::NonConvergence { sweeps, residual }) => {
                assert_eq!(sweeps, 1);
                assert!(residual > 0.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn ebic_on_independent_columns() {
        let data = simulate_factor_data(&vec![vec![0.0]; 6], 500, &RngStream::new(21)).unwrap();
        let m = ebic_select(&data, None, &EbicOptions::default()).unwrap();
        assert!(m.n_edges() <= 1, "{} edges", m.n_edges());
        let single = ebic_select(&data, Some(&[0.2]), &EbicOptions::default()).unwrap();
        assert_eq!(single.lambda, 0.2);
    }

    #[test]
    fn lambda_path_shape() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        let path = lambda_path(&s, 100, 0.01);
        assert_eq!(path.len(), 100);
        assert_abs_diff_eq!(path[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(path[99], 0.005, epsilon = 1e-12);
        assert!(path.windows(2).all(|w| w[0] > w[1]));
    }

    fn two_cliques() -> GaussianGraphModel {
        let mut pcor = vec![vec![0.0; 6]; 6];
        for block in [[0, 1, 2], [3, 4, 5]] {
            for &i in &block {
                for &j in &block {
                    if i != j {
                        pcor[i][j] = 0.4;
                    }
                }
            }
        }
        model_from(pcor)
    }

    #[test]
    fn walktrap_examples() {
        let (labels, q) = walktrap(&two_cliques(), 4).unwrap();
        assert_eq!(labels, vec![0, 0, 0, 1, 1, 1]);
        assert_abs_diff_eq!(q, 0.5, epsilon = 1e-12);
        assert_eq!(walktrap(&two_cliques(), 4).unwrap().0, labels);
        let full = model_from((0..5).map(|i| (0..5).map(|j| if i == j { 0.0 } else { 0.3 }).collect()).collect());
        assert_eq!(walktrap(&full, 4).unwrap().0, vec![0; 5]);
    }

    #[test]
    fn walktrap_bridged_cliques() {
        let mut edges = Vec::new();
        for base in [0, 4] {
            for i in 0..4 {
                for j in i + 1..4 {
                    edges.push((base + i, base + j, 1.0));
                }
            }
        }
        edges.push((3, 4, 0.1));
        let g = WeightedGraph::from_edges(8, edges).unwrap();
        let (labels, _) = walktrap_graph(&g, 4).unwrap();
        assert_eq!(labels, vec![0, 0, 0, 0, 1, 1, 1, 1]);
    }

    #[test]
    fn ega_recovers_blocks() {
        let data = simulate_factor_data(&block_loadings(5, 4, 0.7), 600, &RngStream::new(5)).unwrap();
        let e = ega(&data, &EgaOptions::default()).unwrap();
        assert_eq!(e.n_dims, 5);
        for b in 0..5 {
            let l = e.labels[b * 4];
            assert!(e.labels[b * 4..b * 4 + 4].iter().all(|&x| x == l));
        }
        let one = simulate_factor_data(&block_loadings(1, 6, 0.7), 400, &RngStream::new(6)).unwrap();
        let e = ega(&one, &EgaOptions::default()).unwrap();
        assert_eq!(e.n_dims, 1);
        assert_eq!(e.method, EgaMethod::Unidimensional);
    }

    #[test]
    fn ega_on_empty_network_is_degenerate() {
        let data = simulate_factor_data(&vec![vec![0.0]; 4], 300, &RngStream::new(8)).unwrap();
        let opts = EgaOptions {
            ebic: EbicOptions {
                n_lambda: 1,
                ..Default::default()
            },
            ..Default::default()
        };
        let e = ega(&data, &opts).unwrap();
        assert!(e.degenerate);
        assert_eq!(e.labels, vec![0, 1, 2, 3]);
        assert_eq!(e.method, EgaMethod::EmptyNetwork);
    }

    #[test]
    fn loadings_examples() {
        let mut pcor = vec![vec![0.0; 4]; 4];
        let mut set = |i: usize, j: usize, v: f64| {
            pcor[i][j] = v;
            pcor[j][i] = v;
        };
        set(0, 1, 0.2);
        set(0, 2, -0.3);
        set(0, 3, 0.9);
        let m = model_from(pcor);
        let l = network_loadings(&m, &[0, 0, 0, 1]).unwrap();
        assert_abs_diff_eq!(l[0], 0.5, epsilon = 1e-12);
        assert_eq!(l[3], 0.0);
        assert!(network_loadings(&m, &[0, 0]).is_err());
    }

    #[test]
    fn alignment_matches_by_overlap() {
        assert_eq!(align_to_reference(&[0, 0, 1, 1, 2], &[1, 1, 0, 0, 2]), vec![0, 0, 1, 1, 2]);
        // extra cluster in the bootstrap gets a fresh label
        assert_eq!(align_to_reference(&[0, 0, 1, 1], &[0, 0, 1, 2]), vec![0, 0, 1, 4]);
    }

    #[test]
    fn boot_ega_identity_resampling_is_perfectly_stable() {
        let data = simulate_factor_data(&block_loadings(2, 3, 0.7), 200, &RngStream::new(2)).unwrap();
        let opts = BootOptions {
            n_boot: 100,
            resampling: Resampling::Identity,
            ega: EgaOptions {
                ebic: fast_ebic(),
                ..Default::default()
            },
            ..Default::default()
        };
        let r = boot_ega(&data, &opts, &RngStream::new(1)).unwrap();
        assert!(r.rates.values().all(|&x| x == 1.0));
        assert!(r.removed_items.is_empty());
        assert!(boot_ega(&data, &BootOptions { n_boot: 10, ..opts }, &RngStream::new(1)).is_err());
    }

    #[test]
    fn boot_ega_separated_blocks_and_noise_item() {
        let opts = BootOptions {
            n_boot: 100,
            ega: EgaOptions {
                ebic: fast_ebic(),
                ..Default::default()
            },
            ..Default::default()
        };
        let clean = simulate_factor_data(&block_loadings(2, 4, 0.8), 500, &RngStream::new(3)).unwrap();
        let r = boot_ega(&clean, &opts, &RngStream::new(4)).unwrap();
        assert!(r.rates.values().all(|&x| x == 1.0), "{:?}", r.rates);
        assert_eq!(r.n_dims, 2);

        let mut loadings = block_loadings(2, 4, 0.8);
        loadings.push(vec![0.0, 0.0]);
        let noisy = simulate_factor_data(&loadings, 500, &RngStream::new(3)).unwrap();
        let r = boot_ega(&noisy, &opts, &RngStream::new(4)).unwrap();
        assert_eq!(r.removed_items, vec!["i09".to_string()], "{:?}", r.rounds);
        assert!(r.rounds[0].rates["i09"] < 0.70);
        assert!(r.rates.values().all(|&x| x >= 0.70));
    }

    #[test]
    fn invariance_of_identical_groups() {
        let data = simulate_factor_data(&block_loadings(2, 3, 0.7), 150, &RngStream::new(9)).unwrap();
        let opts = InvarianceOptions {
            n_perm: 100,
            ebic: fast_ebic(),
            ..Default::default()
        };
        let labels = [0, 0, 0, 1, 1, 1];
        let r = metric_invariance(&data, &data, &labels, ("A", "B"), &opts, &RngStream::new(1)).unwrap();
        assert!(r.items.iter().all(|x| x.difference == 0.0 && x.p_raw == 1.0 && !x.noninvariant));
        let again = metric_invariance(&data, &data, &labels, ("A", "B"), &opts, &RngStream::new(1)).unwrap();
        assert_eq!(r, again);
    }

    #[test]
    fn invariance_flags_weakened_item() {
        let a = simulate_factor_data(&block_loadings(2, 4, 0.7), 500, &RngStream::new(10)).unwrap();
        let mut lb = block_loadings(2, 4, 0.7);
        lb[0][0] = 0.35;
        let b = simulate_factor_data(&lb, 500, &RngStream::new(11)).unwrap();
        let opts = InvarianceOptions {
            n_perm: 200,
            ebic: fast_ebic(),
            ..Default::default()
        };
        let labels = [0, 0, 0, 0, 1, 1, 1, 1];
        let r = metric_invariance(&a, &b, &labels, ("human", "twin"), &opts, &RngStream::new(12)).unwrap();
        let row = &r.items[0];
        assert!(row.noninvariant, "{r:?}");
        assert_eq!(row.direction.as_deref(), Some("A > B"));
        for x in &r.items {
            assert_eq!(x.noninvariant, x.p_bh < opts.alpha);
        }
    }

    fn arb_corr() -> impl Strategy<Value = DMatrix<f64>> {
        (2usize..=6).prop_flat_map(|p| {
            proptest::collection::vec(-1.0f64..1.0, p * (p + 2)).prop_map(move |v| {
                let x = DMatrix::from_row_slice(p + 2, p, &v);
                let c = x.transpose() * &x + DMatrix::identity(p, p) * 0.2;
                let d: Vec<f64> = (0..p).map(|i| c[(i, i)].sqrt()).collect();
                DMatrix::from_fn(p, p, |i, j| c[(i, j)] / (d[i] * d[j]))
            })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn unpenalized_fit_matches_dense_inverse(s in arb_corr()) {
            let p = s.nrows();
            let m = glasso(&s, &names(p), 0.0, &tight()).unwrap();
            let dense = dense_pcor(&s);
            for i in 0..p {
                for j in 0..p {
                    prop_assert!((m.pcor(i, j) - dense[(i, j)]).abs() < 1e-6);
                    prop_assert!((m.pcor(i, j) - m.pcor(j, i)).abs() < 1e-10);
                }
            }
        }

        #[test]
        fn path_starts_empty(s in arb_corr()) {
            let p = s.nrows();
            let path = lambda_path(&s, 12, 0.01);
            let counts: Vec<usize> = path.iter().map(|&l| glasso(&s, &names(p), l, &tight()).unwrap().n_edges()).collect();
            prop_assert_eq!(counts[0], 0);
            prop_assert!(counts.iter().all(|&e| e <= p * (p - 1) / 2));
        }

        #[test]
        fn loading_handshake(pcor_vals in proptest::collection::vec(-0.5f64..0.5, 15), labels in proptest::collection::vec(0usize..3, 6)) {
            let mut pcor = vec![vec![0.0; 6]; 6];
            let pairs = (0..6).flat_map(|i| (i + 1..6).map(move |j| (i, j)));
            for ((i, j), &v) in pairs.zip(&pcor_vals) {
                pcor[i][j] = v;
                pcor[j][i] = v;
            }
            let m = model_from(pcor.clone());
            let l = network_loadings(&m, &labels).unwrap();
            let within: f64 = (0..6).flat_map(|i| (i + 1..6).map(move |j| (i, j))).filter(|&(i, j)| labels[i] == labels[j]).map(|(i, j)| pcor[i][j].abs()).sum();
            prop_assert!((l.iter().sum::<f64>() - 2.0 * within).abs() < 1e-12);
        }
    }
}
