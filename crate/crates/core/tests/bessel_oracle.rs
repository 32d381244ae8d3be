use glf::special::ln_bessel_k;

// ln K_nu(x) at 30 significant digits, computed offline with mpmath.besselk.
const TABLE: &[(f64, f64, f64)] = &[
    (0.0, 1.000000e-04, 2.23283535445371765),
    (0.0, 1.000000e-02, 1.55207247884821584),
    (0.0, 5.000000e-01, -0.0785897698690814169),
    (0.0, 1.000000e+00, -0.865064398906788097),
    (0.0, 3.000000e+00, -3.35987778464171963),
    (0.0, 1.000000e+01, -10.9374328230383329),
    (0.0, 5.000000e+01, -51.7326956552909296),
    (0.0, 2.000000e+02, -202.423990776204482),
    (0.3, 1.000000e-04, 3.36989097518034683),
    (0.3, 1.000000e-02, 1.93008598161893309),
    (0.3, 5.000000e-01, -0.0238070273454325734),
    (0.3, 1.000000e+00, -0.832234494867555875),
    (0.3, 3.000000e+00, -3.34677646332397006),
    (0.3, 1.000000e+01, -10.9331369772254178),
    (0.3, 5.000000e+01, -51.7318044688837412),
    (0.3, 2.000000e+02, -202.423766335723522),
    (1.0, 1.000000e-04, 9.21034032284482198),
    (1.0, 1.000000e-02, 4.60490909308926915),
    (1.0, 5.000000e-01, 0.504671397304651177),
    (1.0, 1.000000e+00, -0.507651948210752331),
    (1.0, 3.000000e+00, -3.21497267387733562),
    (1.0, 1.000000e+01, -10.889730180588071),
    (1.0, 5.000000e+01, -51.722793870183626),
    (1.0, 2.000000e+02, -202.421496997752168),
    (1.5, 1.000000e-04, 14.0413019056093348),
    (1.5, 1.000000e-02, 7.13349696248003254),
    (1.5, 5.000000e-01, 1.17097723159280978),
    (1.5, 1.000000e+00, -0.0810614667953272582),
    (1.5, 3.000000e+00, -3.03583271923754649),
    (1.5, 1.000000e+01, -10.8301910140479705),
    (1.5, 5.000000e+01, -51.7104175227731659),
    (1.5, 2.000000e+02, -202.418379789118252),
    (2.5, 1.000000e-04, 24.3502545695866272),
    (2.5, 1.000000e-02, 12.8373124398919667),
    (2.5, 5.000000e-01, 3.01680392209114055),
    (2.5, 1.000000e+00, 1.17170150170004074),
    (2.5, 3.000000e+00, -2.4762169313021238),
    (2.5, 1.000000e+01, -10.640322251618633),
    (2.5, 5.000000e+01, -51.6708198067878981),
    (2.5, 2.000000e+02, -202.408404829239776),
    (3.7, 1.000000e-04, 37.3778290895631922),
    (3.7, 1.000000e-02, 20.3386901430991355),
    (3.7, 5.000000e-01, 5.84121806705184724),
    (3.7, 1.000000e+00, 3.20921424861414426),
    (3.7, 3.000000e+00, -1.4825172818470328),
    (3.7, 1.000000e+01, -10.2897565142282358),
    (3.7, 5.000000e+01, -51.5971947498901765),
    (3.7, 2.000000e+02, -202.389851840539061),
    (10.0, 1.000000e-04, 111.143555824605026),
    (10.0, 1.000000e-02, 65.0918511872245953),
    (10.0, 5.000000e-01, 25.9646824763793069),
    (10.0, 1.000000e+00, 19.0124222996263129),
    (10.0, 3.000000e+00, 7.80776231704409146),
    (10.0, 1.000000e+01, -6.4288815429625959),
    (10.0, 5.000000e+01, -50.7455952643157345),
    (10.0, 2.000000e+02, -202.174663693234541),
];

#[test]
fn ln_bessel_k_matches_high_precision_table() {
    for &(nu, x, expected) in TABLE {
        let got = ln_bessel_k(nu, x);
        let err = (got - expected).abs() / expected.abs().max(1.0);
        assert!(err < 1e-12, "nu={nu} x={x}: {got} vs {expected}");
    }
}
