#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <coarsemp/coarsemp.hpp>

namespace {

// Flags shared by every subcommand. Each subcommand registers the subset it
// uses; defaults live in ExperimentSpec.
void add_graph_flags(CLI::App* cmd, coarsemp::ExperimentSpec& spec) {
  cmd->add_option("--gen", spec.gen,
                  "generate a graph, e.g. geometric:n=1000,t=0.05,seed=7 or "
                  "planted:n=600,classes=3,pin=0.05,pout=0.005,dim=8,noise=1,seed=0");
  cmd->add_option("--graph", spec.graph, "load a dataset directory (edges.tsv, ...)");
  cmd->add_flag("--pcc,!--no-pcc", spec.use_pcc, "restrict to the principal connected component");
}

void add_spectral_flags(CLI::App* cmd, coarsemp::ExperimentSpec& spec) {
  cmd->add_option("--laplacian", spec.laplacian, "comb | norm | shifted:<delta>")
      ->capture_default_str();
  cmd->add_option("--prop", spec.prop, "adj | mean | gcn")->capture_default_str();
  cmd->add_option("--K", spec.K, "preserved subspace dimension (0 = N/10 rounded up)")
      ->capture_default_str();
}

void add_coarsen_flags(CLI::App* cmd, coarsemp::ExperimentSpec& spec) {
  cmd->add_option("--ratios", spec.ratios, "coarsening ratios in [0,1); 0 keeps every node")
      ->delimiter(',')
      ->capture_default_str();
  cmd->add_option("--ne", spec.n_e, "per-sweep merge cap (-1 = 5% of N rounded up, 0 = unbounded)")
      ->capture_default_str();
  cmd->add_flag("--uniform,!--no-uniform", spec.uniform,
                "force uniform supernode weights (default on)");
}

int dispatch(const coarsemp::ExperimentSpec& spec) { return coarsemp::run_command(spec); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph coarsening with spectral certificates and coarse-graph GNN training"};
  app.require_subcommand(0, 1);
  app.set_version_flag("--version", std::string(coarsemp::kVersion));

  coarsemp::ExperimentSpec spec;
  spec.operators = {"mp", "naive", "diag", "diff", "sym"};
  std::string manifest_path;
  app.add_option("--from-manifest", manifest_path,
                 "replay a previous run from its manifest.json (ignores all other flags)");

  auto* gen = app.add_subcommand("gen", "generate a synthetic dataset directory");
  gen->add_option("--gen", spec.gen, "generator spec (see coarsen --help)")->required();
  gen->add_flag("--pcc,!--no-pcc", spec.use_pcc,
                "restrict to the principal connected component");
  gen->add_option("--out", spec.out, "output directory")->capture_default_str();

  auto* coarsen = app.add_subcommand("coarsen", "coarsen a graph and certify the result");
  add_graph_flags(coarsen, spec);
  add_spectral_flags(coarsen, spec);
  add_coarsen_flags(coarsen, spec);
  coarsen->add_option("--k", spec.k_steps, "propagation depth used in the certificate bound")
      ->capture_default_str();
  coarsen->add_option("--assignment", spec.assignment,
                      "skip the greedy coarsening; use this whitespace-separated "
                      "node-to-supernode map instead");
  coarsen->add_option("--out", spec.out, "output directory")->capture_default_str();

  auto* mp = app.add_subcommand("mp-error", "propagation error of coarse operators vs the bound");
  add_graph_flags(mp, spec);
  add_spectral_flags(mp, spec);
  add_coarsen_flags(mp, spec);
  mp->add_option("--operators", spec.operators, "subset of mp,naive,diag,diff,sym")
      ->delimiter(',')
      ->capture_default_str();
  mp->add_option("--k", spec.k_steps, "propagation depth")->capture_default_str();
  mp->add_option("--signals", spec.signals, "random test signals per (ratio, seed)")
      ->capture_default_str();
  mp->add_option("--seeds", spec.seeds, "signal seeds")->delimiter(',')->capture_default_str();
  mp->add_option("--out", spec.out, "output directory")->capture_default_str();

  auto* train = app.add_subcommand("train", "train on coarse graphs with lifted predictions");
  add_graph_flags(train, spec);
  add_spectral_flags(train, spec);
  add_coarsen_flags(train, spec);
  train->add_option("--operators", spec.operators, "subset of mp,naive,diag,diff,sym")
      ->delimiter(',')
      ->capture_default_str();
  train->add_option("--model", spec.model, "sgc:<k> | gcn:<hidden>")->capture_default_str();
  train->add_option("--epochs", spec.epochs, "training epochs")->capture_default_str();
  train->add_option("--lr", spec.lr, "Adam learning rate")->capture_default_str();
  train->add_option("--wd", spec.weight_decay, "L2 weight decay added to the gradient")
      ->capture_default_str();
  train->add_option("--seeds", spec.seeds, "training seeds")->delimiter(',')->capture_default_str();
  train->add_option("--out", spec.out, "output directory")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (!manifest_path.empty()) {
      coarsemp::Json manifest = coarsemp::read_json_file(manifest_path);
      return dispatch(coarsemp::spec_from_json(manifest.at("spec")));
    }
    if (gen->parsed()) spec.command = "gen";
    if (coarsen->parsed()) spec.command = "coarsen";
    if (mp->parsed()) spec.command = "mp-error";
    if (train->parsed()) spec.command = "train";
    if (spec.command.empty()) {
      std::cerr << "error: give a subcommand or --from-manifest (see --help)\n";
      return 1;
    }
    return dispatch(spec);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
