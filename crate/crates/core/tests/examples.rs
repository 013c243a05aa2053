// Every example must run to completion.

macro_rules! example {
    ($name:ident, $path:literal) => {
        #[allow(dead_code)]
        #[path = $path]
        mod $name;

        #[test]
        fn $name() {
            $name::run_example().unwrap();
        }
    };
}

example!(transmission, "../examples/transmission.rs");
example!(spot_size, "../examples/spot_size.rs");
example!(spot_sweep, "../examples/spot_sweep.rs");
example!(volume_roi, "../examples/volume_roi.rs");
example!(superoscillation, "../examples/superoscillation.rs");
example!(bessel_squeezing, "../examples/bessel_squeezing.rs");
example!(bench_retrieval, "../examples/bench_retrieval.rs");
example!(matrices, "../examples/matrices.rs");
example!(vector_measures, "../examples/vector_measures.rs");
example!(propagation, "../examples/propagation.rs");
