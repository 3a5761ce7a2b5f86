// SPDX-License-Identifier: Apache-2.0

use super::*;
use crate::frontend::parse;

fn sim(src: &str) -> Simulator {
    Simulator::new(&parse(src).unwrap(), "key_in").unwrap()
}

fn err(src: &str) -> SimError {
    Simulator::new(&parse(src).unwrap(), "key_in").unwrap_err()
}

#[test]
fn xor_constant() {
    let s = sim("module m(input [7:0] x, output [7:0] y); assign y = x ^ 8'hA5; endmodule");
    let stim: Vec<Vec<u128>> = (0..256).map(|x| vec![x]).collect();
    let t = s.run(&[], &stim).unwrap();
    for x in 0..256u128 {
        assert_eq!(t[x as usize], vec![x ^ 0xA5]);
    }
}

#[test]
fn zero_cycles_is_empty() {
    let s = sim("module m(input clk, input a, output reg q); always @(posedge clk) q <= a; endmodule");
    assert!(s.run(&[], &[]).unwrap().is_empty());
}

#[test]
fn counter_with_async_reset() {
    let s = sim("module c(input clk, input rst_n, input en, output reg [3:0] q);
        always @(posedge clk or negedge rst_n) if (!rst_n) q <= 4'd0; else if (en) q <= q + 4'd1;
        endmodule");
    assert_eq!(s.reset(), Some(("rst_n", false)));
    assert_eq!(s.inputs().iter().map(|p| p.name.as_str()).collect::<Vec<_>>(), ["en"]);
    let t = s.run(&[], &[vec![1], vec![1], vec![0], vec![1]]).unwrap();
    assert_eq!(t, [[0], [1], [2], [2]]);
}

#[test]
fn reset_clears_state_mid_run() {
    let s = sim("module c(input clk, input rst, input [3:0] d, output reg [3:0] q);
        always @(posedge clk or posedge rst) if (rst) q <= 0; else q <= d; endmodule");
    let mut ss = s.session();
    ss.reset_sequence().unwrap();
    ss.apply(&[9]).unwrap();
    ss.settle().unwrap();
    ss.clock().unwrap();
    assert_eq!(ss.peek("q"), Some(9));
    ss.set_reset(true);
    ss.settle().unwrap();
    ss.clock().unwrap();
    assert_eq!(ss.peek("q"), Some(0));
}

#[test]
fn hierarchy_ports_alias_and_convert() {
    let s = sim("module inc(input [3:0] a, output [3:0] y); assign y = a + 4'd1; endmodule
        module top(input [7:0] x, output [7:0] y, output [3:0] z);
          inc u0(.a(x[3:0]), .y(y[3:0]));
          inc u1(.a(x[7:4] ^ 4'd1), .y(y[7:4]));
          inc u2(.a(2'd3), .y(z));
        endmodule");
    let t = s.run(&[], &[vec![0x2f]]).unwrap();
    assert_eq!(t[0], vec![0x40, 4]);
}

#[test]
fn case_casez_and_for() {
    let s = sim("module m(input [3:0] a, output reg [1:0] y, output reg [2:0] n);
        integer i;
        always @* begin
          casez (a) 4'b1???: y = 2'd3; 4'b01??: y = 2'd2; 4'b0001, 4'b0010, 4'b0011: y = 2'd1; default: y = 2'd0; endcase
        end
        always @* begin n = 0; for (i = 0; i < 4; i = i + 1) n = n + a[i]; end
        endmodule");
    let stim: Vec<Vec<u128>> = (0..16).map(|a| vec![a]).collect();
    let t = s.run(&[], &stim).unwrap();
    for a in 0..16u128 {
        let y = if a >= 8 {
            3
        } else if a >= 4 {
            2
        } else if a >= 1 {
            1
        } else {
            0
        };
        assert_eq!(t[a as usize], vec![y, a.count_ones() as u128]);
    }
}

#[test]
fn chained_assigns_in_any_order() {
    let s = sim("module m(input [3:0] a, output [3:0] y); wire [3:0] b, c;
        assign y = c + 4'd1; assign c = b << 1; assign b = a ^ 4'd5; endmodule");
    assert_eq!(s.run(&[], &[vec![3]]).unwrap()[0], vec![(((3 ^ 5) << 1) + 1) & 15]);
}

#[test]
fn false_loop_converges() {
    let s = sim("module m(input a, input b, output [1:0] y); wire [1:0] t;
        assign t[0] = a; assign t[1] = t[0] & b; assign y = t; endmodule");
    assert_eq!(s.run(&[], &[vec![1, 1]]).unwrap()[0], vec![3]);
}

#[test]
fn loop_is_an_error() {
    let s = sim("module m(input a, output y); wire p, q; assign p = ~q ^ a; assign q = p; assign y = q; endmodule");
    assert_eq!(s.run(&[], &[vec![0]]), Err(SimError::CombinationalLoop(vec!["p".into(), "q".into()])));
}

#[test]
fn two_drivers_conflict() {
    assert_eq!(
        err("module m(input a, input b, output y); assign y = a; assign y = b; endmodule"),
        SimError::DriverConflict("y".into())
    );
}

#[test]
fn shared_loop_variable_is_not_a_conflict() {
    sim("module m(input [3:0] a, output reg [3:0] y, output reg [3:0] z); integer i;
        always @* for (i = 0; i < 4; i = i + 1) y[i] = a[3 - i];
        always @* for (i = 0; i < 4; i = i + 1) z[i] = ~a[i];
        endmodule");
}

#[test]
fn key_width_checked() {
    let s = sim("module m(input [1:0] key_in, input a, output y); assign y = a ^ key_in[0] ^ key_in[1]; endmodule");
    assert_eq!(s.key_width(), 2);
    assert_eq!(s.run(&[true], &[]), Err(SimError::KeyWidth { expected: 2, got: 1 }));
    assert_eq!(s.run(&[true, false], &[vec![0]]).unwrap(), [[1]]);
}

#[test]
fn wide_signals_cross_words() {
    let s = sim("module m(input [63:0] a, input [63:0] b, output [127:0] y, output [7:0] z); wire [199:0] w;
        assign w[127:0] = {a, b}; assign w[199:128] = {a[7:0], a}; assign y = w[191:64]; assign z = w[199:192];
        endmodule");
    let (a, b) = (0x0123_4567_89ab_cdefu128, 0xfedc_ba98_7654_3210u128);
    let t = s.run(&[], &[vec![a, b]]).unwrap();
    assert_eq!(t[0], vec![a << 64 | a, a & 0xff]);
}

#[test]
fn nonblocking_swap() {
    let s = sim("module m(input clk, input rst, output reg [1:0] p, output reg [1:0] q);
        always @(posedge clk or posedge rst) if (rst) begin p <= 2'd1; q <= 2'd2; end else begin p <= q; q <= p; end
        endmodule");
    assert_eq!(s.run(&[], &[vec![], vec![], vec![]]).unwrap(), [[1, 2], [2, 1], [1, 2]]);
}

#[test]
fn batch_matches_individual_runs() {
    let s = sim("module a(input clk, input rst, input [1:0] d, output reg [3:0] q);
        always @(posedge clk or posedge rst) if (rst) q <= 4'd1; else q <= (q << 1) ^ d; endmodule");
    let seqs: Vec<Vec<Vec<u128>>> = (0..64u128)
        .map(|k| vec![vec![k >> 4], vec![(k >> 2) & 3], vec![k & 3]])
        .chain(std::iter::repeat_n(vec![vec![1]; 3], 2))
        .collect();
    let batch = s.run_batch(&mut s.session(), &[], &seqs).unwrap();
    for (seq, t) in seqs.iter().zip(&batch) {
        assert_eq!(&s.run(&[], seq).unwrap(), t);
    }
}
