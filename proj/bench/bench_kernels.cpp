#include "sharpflow/analysis.hpp"

#include <benchmark/benchmark.h>

using namespace sharpflow;

namespace {

Eigen::MatrixXd preacts(benchmark::State& state) {
  const Eigen::Index n = state.range(0);
  return Eigen::MatrixXd::Random(n, n) * 2.0;
}

template <auto Fn>
void BM_DerivativeGrid(benchmark::State& state) {
  auto spec = odd_poly(1, 1.0);
  Eigen::MatrixXd z = preacts(state);
  for (auto _ : state) benchmark::DoNotOptimize(Fn(spec, z));
  state.SetItemsProcessed(state.iterations() * z.size());
}

template <auto Fn>
void BM_BlockHessian(benchmark::State& state) {
  const Eigen::Index m = state.range(0);
  Eigen::MatrixXd C = Eigen::MatrixXd::Random(m, 8);
  Eigen::MatrixXd X = Eigen::MatrixXd::Random(16, 8);
  for (auto _ : state) benchmark::DoNotOptimize(Fn(C, X));
}

struct LossField {
  Dataset data;
  ActivationSpec spec = odd_poly(1, 1.0);
  int m, d;
  LossField(int m_, int d_, int n) : m(m_), d(d_) {
    GenerateOptions opt;
    data = generate_dataset(n, d, LabelMode::UniformBox, 1, opt);
  }
  kernels::ScalarField field() const {
    return [this](const Eigen::VectorXd& x) { return loss(Params(x, m, d), data, spec); };
  }
};

template <auto Fn>
void BM_FdGradient(benchmark::State& state) {
  LossField lf(int(state.range(0)), 16, 8);
  Eigen::VectorXd x = random_params(lf.m, lf.d, 0.3, 2).flat;
  auto f = lf.field();
  for (auto _ : state) benchmark::DoNotOptimize(Fn(f, x, 1e-5));
}

template <auto Fn>
void BM_FdSecondTrace(benchmark::State& state) {
  LossField lf(int(state.range(0)), 16, 8);
  Eigen::VectorXd x = random_params(lf.m, lf.d, 0.3, 3).flat;
  auto f = lf.field();
  for (auto _ : state) benchmark::DoNotOptimize(Fn(f, x, 1e-4));
}

}  // namespace

BENCHMARK(BM_DerivativeGrid<kernels::derivative_grid_serial>)->Name("derivative_grid/serial")->Arg(64)->Arg(512);
BENCHMARK(BM_DerivativeGrid<kernels::derivative_grid_omp>)->Name("derivative_grid/omp")->Arg(64)->Arg(512);
BENCHMARK(BM_BlockHessian<kernels::block_hessian_serial>)->Name("block_hessian/serial")->Arg(16)->Arg(64);
BENCHMARK(BM_BlockHessian<kernels::block_hessian_omp>)->Name("block_hessian/omp")->Arg(16)->Arg(64);
BENCHMARK(BM_FdGradient<kernels::fd_gradient_serial>)->Name("fd_gradient/serial")->Arg(8)->Arg(32);
BENCHMARK(BM_FdGradient<kernels::fd_gradient_omp>)->Name("fd_gradient/omp")->Arg(8)->Arg(32);
BENCHMARK(BM_FdSecondTrace<kernels::fd_second_trace_serial>)->Name("fd_second_trace/serial")->Arg(8)->Arg(32);
BENCHMARK(BM_FdSecondTrace<kernels::fd_second_trace_omp>)->Name("fd_second_trace/omp")->Arg(8)->Arg(32);

BENCHMARK_MAIN();
