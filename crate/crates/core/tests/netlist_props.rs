use proptest::prelude::*;

use pfsl::io::{parse_document, parse_netlist, parse_netlist_bytes, serialize_netlist};
use pfsl::model::{capacitance_at_bias, ElementKind, Netlist, SourceSpec, VaractorModel};

fn positive() -> impl Strategy<Value = f64> {
    (1.0f64..10.0, -15i32..10).prop_map(|(m, e)| m * 10f64.powi(e))
}

fn model() -> impl Strategy<Value = VaractorModel> {
    (0.5e-12f64..5e-12, 0.4f64..1.2, 0.3f64..1.5, 5.0f64..100.0, 0.0f64..1e-12).prop_map(
        |(c_j0, v_j, gamma, q_v, c_pkg)| VaractorModel {
            c_j0,
            v_j,
            gamma,
            q_v,
            c_pkg,
            ..VaractorModel::default()
        },
    )
}

fn source() -> impl Strategy<Value = SourceSpec> {
    (positive(), positive(), 1.0f64..100.0).prop_map(|(freq, power, z_source)| SourceSpec {
        freq,
        power,
        z_source,
    })
}

fn kind(models: Vec<VaractorModel>) -> impl Strategy<Value = ElementKind> {
    let q = proptest::option::of(10.0f64..5000.0);
    prop_oneof![
        positive().prop_map(|ohms| ElementKind::Resistor { ohms }),
        (positive(), q.clone()).prop_map(|(henries, q)| ElementKind::Inductor { henries, q }),
        (positive(), q).prop_map(|(farads, q)| ElementKind::Capacitor { farads, q }),
        (0..models.len(), 0.0f64..5.0).prop_map(move |(i, v)| ElementKind::Varactor {
            model_name: format!("d{i}"),
            device: capacitance_at_bias(&models[i], v).unwrap(),
        }),
        source().prop_map(ElementKind::CwSource),
        source().prop_map(ElementKind::PagSource),
    ]
}

fn netlist() -> impl Strategy<Value = Netlist> {
    proptest::collection::vec(model(), 1..3).prop_flat_map(|models| {
        (
            proptest::collection::vec((kind(models), 0usize..6, 1usize..6), 1..12),
            proptest::option::of(positive()),
            proptest::collection::vec((any::<proptest::sample::Index>(), 1.0f64..100.0), 0..3),
        )
            .prop_map(|(elements, f_ref, ports)| {
                let mut net = Netlist::new();
                net.f_ref = f_ref;
                for (i, (kind, a, b)) in elements.into_iter().enumerate() {
                    let prefix = match kind {
                        ElementKind::Resistor { .. } => 'R',
                        ElementKind::Inductor { .. } => 'L',
                        ElementKind::Capacitor { .. } => 'C',
                        ElementKind::Varactor { .. } => 'X',
                        ElementKind::CwSource(_) => 'V',
                        ElementKind::PagSource(_) => 'A',
                    };
                    net.add(format!("{prefix}{i}"), a, b, kind);
                }
                for (idx, z0) in ports {
                    let node = net.elements[idx.index(net.elements.len())].node_b;
                    net.add_port(node, 0, z0);
                }
                net
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn arbitrary_bytes_never_panic(bytes in proptest::collection::vec(any::<u8>(), 0..256)) {
        let _ = parse_netlist_bytes(&bytes);
    }

    #[test]
    fn netlist_shaped_text_never_panics(text in "([RLCXVA.*#][a-z0-9]{0,3}( [0-9a-z.=+-]{0,8}){0,5}\n){0,8}") {
        let doc = parse_document(&text);
        if parse_netlist(&text).is_err() {
            prop_assert!(!doc.diagnostics.is_empty());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn serialized_netlists_parse_back_unchanged(net in netlist()) {
        let text = serialize_netlist(&net);
        let back = parse_netlist(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        prop_assert_eq!(&back, &net, "{}", text);
        prop_assert_eq!(serialize_netlist(&back), text);
    }
}
