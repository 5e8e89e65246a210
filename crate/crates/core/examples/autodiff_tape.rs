//! The reverse-mode tape behind the corrector, checked against a central
//! difference on a two-layer perceptron.

use qburgers::qagt::tape::{Mat, Tape};

fn loss(x: &Mat, w1: &Mat, w2: &Mat, target: &[f64]) -> (f64, Vec<f64>) {
    let mut tape = Tape::new();
    let xv = tape.leaf(x.clone());
    let a = tape.leaf(w1.clone());
    let b = tape.leaf(w2.clone());
    let h = tape.matmul(xv, a);
    let h = tape.elu(h);
    let y = tape.matmul(h, b);
    let l = tape.mse(y, target);
    let grads = tape.backward(l);
    (tape.value(l).data[0], grads.get(a).unwrap().data.clone())
}

fn main() {
    let x = Mat::from_vec(1, 3, vec![0.5, -1.0, 2.0]);
    let w1 = Mat::from_vec(3, 4, (0..12).map(|i| (i as f64 * 0.37).sin()).collect());
    let w2 = Mat::from_vec(4, 2, (0..8).map(|i| (i as f64 * 0.91).cos()).collect());
    let target = [0.25, -0.5];

    let (l, g) = loss(&x, &w1, &w2, &target);
    println!("loss {l:.6}");
    let h = 1e-6;
    for e in 0..w1.data.len() {
        let mut plus = w1.clone();
        plus.data[e] += h;
        let mut minus = w1.clone();
        minus.data[e] -= h;
        let fd = (loss(&x, &plus, &w2, &target).0 - loss(&x, &minus, &w2, &target).0) / (2.0 * h);
        println!("dL/dW1[{e:>2}] tape {:>+.8} fd {:>+.8}", g[e], fd);
    }
}
