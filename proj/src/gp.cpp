#include "sodbench/gp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "sodbench/error.hpp"

namespace sodbench {

namespace {

constexpr double kPlaneCap = 1e6;
constexpr double kDivEps = 1e-12;

constexpr GpOp kTerminals[] = {GpOp::TermR, GpOp::TermG, GpOp::TermB,
                               GpOp::TermGray, GpOp::TermSmooth1, GpOp::TermSmooth2};
constexpr GpOp kUnary[] = {GpOp::Abs, GpOp::Sqr, GpOp::Box3, GpOp::Sobel,
                           GpOp::Dilate3, GpOp::Erode3, GpOp::Norm};
constexpr GpOp kBinary[] = {GpOp::Add, GpOp::Sub, GpOp::Mul, GpOp::Div};
constexpr GpOp kFunctions[] = {GpOp::Abs, GpOp::Sqr, GpOp::Box3, GpOp::Sobel,
                               GpOp::Dilate3, GpOp::Erode3, GpOp::Norm,
                               GpOp::Add, GpOp::Sub, GpOp::Mul, GpOp::Div};

using Plane = std::vector<double>;

double cap(double v) { return std::clamp(v, -kPlaneCap, kPlaneCap); }

Plane binomial3(const Plane& in, int h, int w) {
  // Separable [1 2 1]/4 with replicated borders.
  Plane tmp(in.size()), out(in.size());
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int xm = std::max(0, x - 1), xp = std::min(w - 1, x + 1);
      tmp[std::size_t(y) * w + x] = 0.25 * (in[std::size_t(y) * w + xm] +
                                            2.0 * in[std::size_t(y) * w + x] +
                                            in[std::size_t(y) * w + xp]);
    }
  }
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    const int ym = std::max(0, y - 1), yp = std::min(h - 1, y + 1);
    for (int x = 0; x < w; ++x) {
      out[std::size_t(y) * w + x] = 0.25 * (tmp[std::size_t(ym) * w + x] +
                                            2.0 * tmp[std::size_t(y) * w + x] +
                                            tmp[std::size_t(yp) * w + x]);
    }
  }
  return out;
}

Plane box3(const Plane& in, int h, int w) {
  Plane out(in.size());
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    const int y0 = std::max(0, y - 1), y1 = std::min(h - 1, y + 1);
    for (int x = 0; x < w; ++x) {
      const int x0 = std::max(0, x - 1), x1 = std::min(w - 1, x + 1);
      double sum = 0.0;
      for (int yy = y0; yy <= y1; ++yy)
        for (int xx = x0; xx <= x1; ++xx) sum += in[std::size_t(yy) * w + xx];
      out[std::size_t(y) * w + x] = sum / ((y1 - y0 + 1) * (x1 - x0 + 1));
    }
  }
  return out;
}

Plane sobel_magnitude(const Plane& in, int h, int w) {
  Plane out(in.size());
  auto px = [&](int y, int x) {
    return in[std::size_t(std::clamp(y, 0, h - 1)) * w + std::clamp(x, 0, w - 1)];
  };
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double gx = px(y - 1, x + 1) + 2.0 * px(y, x + 1) + px(y + 1, x + 1) -
                        px(y - 1, x - 1) - 2.0 * px(y, x - 1) - px(y + 1, x - 1);
      const double gy = px(y + 1, x - 1) + 2.0 * px(y + 1, x) + px(y + 1, x + 1) -
                        px(y - 1, x - 1) - 2.0 * px(y - 1, x) - px(y - 1, x + 1);
      out[std::size_t(y) * w + x] = cap(std::sqrt(gx * gx + gy * gy));
    }
  }
  return out;
}

Plane morpho3(const Plane& in, int h, int w, bool dilate) {
  Plane out(in.size());
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    const int y0 = std::max(0, y - 1), y1 = std::min(h - 1, y + 1);
    for (int x = 0; x < w; ++x) {
      const int x0 = std::max(0, x - 1), x1 = std::min(w - 1, x + 1);
      double best = in[std::size_t(y0) * w + x0];
      for (int yy = y0; yy <= y1; ++yy)
        for (int xx = x0; xx <= x1; ++xx) {
          const double v = in[std::size_t(yy) * w + xx];
          best = dilate ? std::max(best, v) : std::min(best, v);
        }
      out[std::size_t(y) * w + x] = best;
    }
  }
  return out;
}

struct TerminalPlanes {
  int h = 0, w = 0;
  Plane r, g, b, gray, smooth1, smooth2;
};

TerminalPlanes make_terminals(const Image& img) {
  TerminalPlanes t;
  t.h = img.height;
  t.w = img.width;
  const std::size_t n = img.pixels();
  t.r.resize(n);
  t.g.resize(n);
  t.b.resize(n);
  t.gray.resize(n);
  for (std::size_t p = 0; p < n; ++p) {
    t.r[p] = img.data[p * 3] / 255.0;
    t.g[p] = img.data[p * 3 + 1] / 255.0;
    t.b[p] = img.data[p * 3 + 2] / 255.0;
    t.gray[p] = (t.r[p] + t.g[p] + t.b[p]) / 3.0;
  }
  t.smooth1 = binomial3(t.gray, t.h, t.w);
  t.smooth2 = binomial3(t.smooth1, t.h, t.w);
  return t;
}

Plane eval_node(const std::vector<GpOp>& ops, std::size_t& pos, const TerminalPlanes& t) {
  const GpOp op = ops[pos++];
  switch (op) {
    case GpOp::TermR: return t.r;
    case GpOp::TermG: return t.g;
    case GpOp::TermB: return t.b;
    case GpOp::TermGray: return t.gray;
    case GpOp::TermSmooth1: return t.smooth1;
    case GpOp::TermSmooth2: return t.smooth2;
    default: break;
  }
  Plane a = eval_node(ops, pos, t);
  if (gp_arity(op) == 1) {
    switch (op) {
      case GpOp::Abs:
        for (double& v : a) v = std::abs(v);
        return a;
      case GpOp::Sqr:
        for (double& v : a) v = cap(v * v);
        return a;
      case GpOp::Box3: return box3(a, t.h, t.w);
      case GpOp::Sobel: return sobel_magnitude(a, t.h, t.w);
      case GpOp::Dilate3: return morpho3(a, t.h, t.w, true);
      case GpOp::Erode3: return morpho3(a, t.h, t.w, false);
      case GpOp::Norm:
        minmax_normalize(a);
        return a;
      default: break;
    }
  }
  Plane b = eval_node(ops, pos, t);
  switch (op) {
    case GpOp::Add:
      for (std::size_t i = 0; i < a.size(); ++i) a[i] = cap(a[i] + b[i]);
      return a;
    case GpOp::Sub:
      for (std::size_t i = 0; i < a.size(); ++i) a[i] = cap(a[i] - b[i]);
      return a;
    case GpOp::Mul:
      for (std::size_t i = 0; i < a.size(); ++i) a[i] = cap(a[i] * b[i]);
      return a;
    case GpOp::Div:
      for (std::size_t i = 0; i < a.size(); ++i) {
        a[i] = std::abs(b[i]) < kDivEps ? 1.0 : cap(a[i] / b[i]);
      }
      return a;
    default:
      throw Error(ErrorCode::MalformedProgram, "unknown operator");
  }
}

}  // namespace

int gp_arity(GpOp op) {
  switch (op) {
    case GpOp::TermR:
    case GpOp::TermG:
    case GpOp::TermB:
    case GpOp::TermGray:
    case GpOp::TermSmooth1:
    case GpOp::TermSmooth2: return 0;
    case GpOp::Abs:
    case GpOp::Sqr:
    case GpOp::Box3:
    case GpOp::Sobel:
    case GpOp::Dilate3:
    case GpOp::Erode3:
    case GpOp::Norm: return 1;
    case GpOp::Add:
    case GpOp::Sub:
    case GpOp::Mul:
    case GpOp::Div: return 2;
  }
  return 0;
}

const char* gp_name(GpOp op) {
  switch (op) {
    case GpOp::TermR: return "r";
    case GpOp::TermG: return "g";
    case GpOp::TermB: return "b";
    case GpOp::TermGray: return "gray";
    case GpOp::TermSmooth1: return "smooth1";
    case GpOp::TermSmooth2: return "smooth2";
    case GpOp::Abs: return "abs";
    case GpOp::Sqr: return "sqr";
    case GpOp::Box3: return "box3";
    case GpOp::Sobel: return "sobel";
    case GpOp::Dilate3: return "dilate3";
    case GpOp::Erode3: return "erode3";
    case GpOp::Norm: return "norm";
    case GpOp::Add: return "add";
    case GpOp::Sub: return "sub";
    case GpOp::Mul: return "mul";
    case GpOp::Div: return "div";
  }
  return "?";
}

std::size_t gp_subtree_end(const std::vector<GpOp>& ops, std::size_t pos) {
  std::size_t pending = 1;
  std::size_t i = pos;
  while (pending > 0) {
    if (i >= ops.size()) throw Error(ErrorCode::MalformedProgram, "truncated program");
    pending = pending - 1 + static_cast<std::size_t>(gp_arity(ops[i]));
    ++i;
  }
  return i;
}

int GpProgram::depth() const {
  if (ops.empty()) return 0;
  // Depth via the preorder walk: track the depth of each pending child.
  std::vector<int> stack{1};
  int best = 0;
  for (const GpOp op : ops) {
    if (stack.empty()) throw Error(ErrorCode::MalformedProgram, "extra nodes after root");
    const int d = stack.back();
    stack.pop_back();
    best = std::max(best, d);
    for (int k = 0; k < gp_arity(op); ++k) stack.push_back(d + 1);
  }
  if (!stack.empty()) throw Error(ErrorCode::MalformedProgram, "truncated program");
  return best;
}

bool GpProgram::valid() const {
  if (ops.empty()) return false;
  std::size_t pending = 1;
  for (const GpOp op : ops) {
    if (pending == 0) return false;
    pending = pending - 1 + static_cast<std::size_t>(gp_arity(op));
  }
  return pending == 0;
}

std::string GpProgram::to_string() const {
  if (!valid()) throw Error(ErrorCode::MalformedProgram, "cannot print invalid program");
  std::string out;
  std::size_t pos = 0;
  auto emit = [&](auto&& self, std::size_t& i) -> void {
    const GpOp op = ops[i++];
    const int arity = gp_arity(op);
    if (arity == 0) {
      out += gp_name(op);
      return;
    }
    out += '(';
    out += gp_name(op);
    for (int k = 0; k < arity; ++k) {
      out += ' ';
      self(self, i);
    }
    out += ')';
  };
  emit(emit, pos);
  return out;
}

namespace {

GpOp op_from_name(const std::string& name) {
  static const std::pair<const char*, GpOp> table[] = {
      {"r", GpOp::TermR},       {"g", GpOp::TermG},           {"b", GpOp::TermB},
      {"gray", GpOp::TermGray}, {"smooth1", GpOp::TermSmooth1}, {"smooth2", GpOp::TermSmooth2},
      {"abs", GpOp::Abs},       {"sqr", GpOp::Sqr},           {"box3", GpOp::Box3},
      {"sobel", GpOp::Sobel},   {"dilate3", GpOp::Dilate3},   {"erode3", GpOp::Erode3},
      {"norm", GpOp::Norm},     {"add", GpOp::Add},           {"sub", GpOp::Sub},
      {"mul", GpOp::Mul},       {"div", GpOp::Div},
  };
  for (const auto& [n, op] : table) {
    if (name == n) return op;
  }
  throw Error(ErrorCode::MalformedProgram, "unknown symbol '" + name + "'");
}

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char c : text) {
    if (c == '(' || c == ')') {
      if (!cur.empty()) {
        tokens.push_back(cur);
        cur.clear();
      }
      tokens.push_back(std::string(1, c));
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      if (!cur.empty()) {
        tokens.push_back(cur);
        cur.clear();
      }
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) tokens.push_back(cur);
  return tokens;
}

void parse_node(const std::vector<std::string>& tokens, std::size_t& i, std::vector<GpOp>& out) {
  if (i >= tokens.size()) throw Error(ErrorCode::MalformedProgram, "unexpected end of input");
  if (tokens[i] == "(") {
    ++i;
    if (i >= tokens.size()) throw Error(ErrorCode::MalformedProgram, "dangling '('");
    const GpOp op = op_from_name(tokens[i++]);
    const int arity = gp_arity(op);
    if (arity == 0) {
      throw Error(ErrorCode::MalformedProgram,
                  std::string("terminal '") + gp_name(op) + "' cannot take arguments");
    }
    out.push_back(op);
    for (int k = 0; k < arity; ++k) parse_node(tokens, i, out);
    if (i >= tokens.size() || tokens[i] != ")") {
      throw Error(ErrorCode::MalformedProgram, std::string("expected ')' after ") + gp_name(op));
    }
    ++i;
  } else if (tokens[i] == ")") {
    throw Error(ErrorCode::MalformedProgram, "unexpected ')'");
  } else {
    const GpOp op = op_from_name(tokens[i++]);
    if (gp_arity(op) != 0) {
      throw Error(ErrorCode::MalformedProgram,
                  std::string("operator '") + gp_name(op) + "' needs arguments");
    }
    out.push_back(op);
  }
}

}  // namespace

GpProgram GpProgram::parse(const std::string& text) {
  const std::vector<std::string> tokens = tokenize(text);
  if (tokens.empty()) throw Error(ErrorCode::MalformedProgram, "empty program text");
  GpProgram prog;
  std::size_t i = 0;
  parse_node(tokens, i, prog.ops);
  if (i != tokens.size()) throw Error(ErrorCode::MalformedProgram, "trailing tokens");
  return prog;
}

void GpProgram::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::UnwritablePath, path.string());
  out << to_string() << "\n";
  if (!out) throw Error(ErrorCode::UnwritablePath, path.string());
}

GpProgram GpProgram::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingFile, path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

SaliencyMap gp_evaluate(const GpProgram& prog, const Image& img) {
  if (!prog.valid()) throw Error(ErrorCode::MalformedProgram, "cannot evaluate invalid program");
  const TerminalPlanes terminals = make_terminals(img);
  std::size_t pos = 0;
  Plane plane = eval_node(prog.ops, pos, terminals);
  minmax_normalize(plane);
  SaliencyMap map;
  map.height = img.height;
  map.width = img.width;
  map.data = std::move(plane);
  return map;
}

GpProgram gp_random_program(int max_depth, bool full, RngStream& rng) {
  GpProgram prog;
  auto grow = [&](auto&& self, int depth) -> void {
    const bool leaf = depth >= max_depth ||
                      (!full && depth > 1 && rng.uniform() < 0.3);
    if (leaf) {
      prog.ops.push_back(kTerminals[rng.below(std::size(kTerminals))]);
      return;
    }
    const GpOp op = kFunctions[rng.below(std::size(kFunctions))];
    prog.ops.push_back(op);
    for (int k = 0; k < gp_arity(op); ++k) self(self, depth + 1);
  };
  grow(grow, 1);
  return prog;
}

namespace {

std::size_t pick_node(const GpProgram& prog, RngStream& rng) {
  return static_cast<std::size_t>(rng.below(prog.size()));
}

GpProgram subtree_crossover(const GpProgram& a, const GpProgram& b, int max_depth,
                            RngStream& rng) {
  for (int attempt = 0; attempt < 10; ++attempt) {
    const std::size_t ai = pick_node(a, rng);
    const std::size_t bi = pick_node(b, rng);
    const std::size_t a_end = gp_subtree_end(a.ops, ai);
    const std::size_t b_end = gp_subtree_end(b.ops, bi);
    GpProgram child;
    child.ops.reserve(a.size() - (a_end - ai) + (b_end - bi));
    child.ops.insert(child.ops.end(), a.ops.begin(), a.ops.begin() + ai);
    child.ops.insert(child.ops.end(), b.ops.begin() + bi, b.ops.begin() + b_end);
    child.ops.insert(child.ops.end(), a.ops.begin() + a_end, a.ops.end());
    if (child.depth() <= max_depth) return child;
  }
  return a;  // rejection fallback
}

void point_mutate(GpProgram& prog, RngStream& rng) {
  const std::size_t i = pick_node(prog, rng);
  switch (gp_arity(prog.ops[i])) {
    case 0: prog.ops[i] = kTerminals[rng.below(std::size(kTerminals))]; break;
    case 1: prog.ops[i] = kUnary[rng.below(std::size(kUnary))]; break;
    default: prog.ops[i] = kBinary[rng.below(std::size(kBinary))]; break;
  }
}

double program_fitness(const GpProgram& prog, const std::vector<LabeledPair>& dataset,
                       const FBetaConfig& cfg) {
  double sum = 0.0;
  for (const auto& [img, mask] : dataset) {
    sum += max_fbeta(gp_evaluate(prog, img), mask, cfg);
  }
  return sum / static_cast<double>(dataset.size());
}

}  // namespace

GpTrainResult gp_train(const std::vector<LabeledPair>& dataset, const EvolutionParams& params,
                       const FBetaConfig& cfg) {
  if (dataset.empty()) throw Error(ErrorCode::EmptyDataset, "gp_train needs a dataset");
  for (const auto& [img, mask] : dataset) {
    (void)img;
    if (mask.positive_count() == 0) {
      throw Error(ErrorCode::EmptyGroundTruth, "training mask has no positive pixel");
    }
  }
  if (params.population_size < 1 || params.generations < 0 || params.max_depth < 1 ||
      params.elitism < 1 || params.elitism > params.population_size ||
      params.crossover_rate < 0.0 || params.crossover_rate > 1.0 ||
      params.mutation_rate < 0.0 || params.mutation_rate > 1.0 || params.tournament_size < 1) {
    throw Error(ErrorCode::InvalidArgument, "bad evolution parameters");
  }

  RngStream rng(params.seed);
  const int pop_size = params.population_size;

  // Ramped half-and-half: alternate grow/full across a cycle of depths.
  std::vector<GpProgram> population;
  population.reserve(pop_size);
  for (int i = 0; i < pop_size; ++i) {
    const int depth = 2 + static_cast<int>(i % std::max(1, params.max_depth - 1));
    population.push_back(gp_random_program(std::min(depth, params.max_depth), i % 2 == 0, rng));
  }

  std::vector<double> fitness(pop_size, 0.0);
  auto evaluate_all = [&](const std::vector<char>& needs_eval) {
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < pop_size; ++i) {
      if (needs_eval[i]) fitness[i] = program_fitness(population[i], dataset, cfg);
    }
  };
  evaluate_all(std::vector<char>(pop_size, 1));

  auto best_index = [&]() {
    int best = 0;
    for (int i = 1; i < pop_size; ++i) {
      if (fitness[i] > fitness[best]) best = i;
    }
    return best;
  };

  auto tournament = [&]() {
    int winner = static_cast<int>(rng.below(pop_size));
    for (int k = 1; k < params.tournament_size; ++k) {
      const int challenger = static_cast<int>(rng.below(pop_size));
      if (fitness[challenger] > fitness[winner]) winner = challenger;
    }
    return winner;
  };

  GpTrainResult result;
  result.fitness_trace.push_back(fitness[best_index()]);

  for (int gen = 0; gen < params.generations; ++gen) {
    // Elites: highest fitness first, index order breaking ties.
    std::vector<int> order(pop_size);
    for (int i = 0; i < pop_size; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](int lhs, int rhs) { return fitness[lhs] > fitness[rhs]; });

    std::vector<GpProgram> next;
    std::vector<double> next_fitness;
    std::vector<char> needs_eval;
    next.reserve(pop_size);
    for (int e = 0; e < params.elitism; ++e) {
      next.push_back(population[order[e]]);
      next_fitness.push_back(fitness[order[e]]);
      needs_eval.push_back(0);
    }
    while (static_cast<int>(next.size()) < pop_size) {
      const int p1 = tournament();
      GpProgram child = population[p1];
      if (rng.uniform() < params.crossover_rate) {
        const int p2 = tournament();
        child = subtree_crossover(population[p1], population[p2], params.max_depth, rng);
      }
      if (rng.uniform() < params.mutation_rate) point_mutate(child, rng);
      next.push_back(std::move(child));
      next_fitness.push_back(0.0);
      needs_eval.push_back(1);
    }
    population = std::move(next);
    fitness = std::move(next_fitness);
    evaluate_all(needs_eval);
    result.fitness_trace.push_back(fitness[best_index()]);
  }

  const int best = best_index();
  result.best = population[best];
  result.best_fitness = fitness[best];
  return result;
}

}  // namespace sodbench
