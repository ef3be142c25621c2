#include "otbridge/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>

namespace otbridge {

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

namespace {

[[noreturn]] void fail(int line, const std::string& message) {
  throw SpecError("config:" + std::to_string(line) + ": " + message);
}

// ---------------------------------------------------------------------------
// Tokenizer
// ---------------------------------------------------------------------------

struct Token {
  enum Kind { Word, Number, String, Equals, OpenBrace, CloseBrace, OpenBracket,
              CloseBracket, Comma, End } kind = End;
  std::string text;
  int line = 1;
};

std::vector<Token> tokenize(const std::string& text) {
  std::vector<Token> out;
  int line = 1;
  std::size_t i = 0;
  const auto push = [&](Token::Kind k, std::string t) { out.push_back({k, std::move(t), line}); };
  while (i < text.size()) {
    const char c = text[i];
    if (c == '\n') {
      ++line;
      ++i;
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
    } else if (c == '#') {
      while (i < text.size() && text[i] != '\n') ++i;
    } else if (c == '=') {
      push(Token::Equals, "=");
      ++i;
    } else if (c == '{') {
      push(Token::OpenBrace, "{");
      ++i;
    } else if (c == '}') {
      push(Token::CloseBrace, "}");
      ++i;
    } else if (c == '[') {
      push(Token::OpenBracket, "[");
      ++i;
    } else if (c == ']') {
      push(Token::CloseBracket, "]");
      ++i;
    } else if (c == ',') {
      push(Token::Comma, ",");
      ++i;
    } else if (c == '"') {
      std::string s;
      ++i;
      while (i < text.size() && text[i] != '"') {
        if (text[i] == '\n') fail(line, "unterminated string");
        s += text[i++];
      }
      if (i >= text.size()) fail(line, "unterminated string");
      ++i;
      push(Token::String, std::move(s));
    } else if (std::isdigit(static_cast<unsigned char>(c)) || c == '-' || c == '+' ||
               c == '.') {
      std::string s;
      while (i < text.size() &&
             (std::isalnum(static_cast<unsigned char>(text[i])) || text[i] == '.' ||
              text[i] == '-' || text[i] == '+'))
        s += text[i++];
      push(Token::Number, std::move(s));
    } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::string s;
      while (i < text.size() && (std::isalnum(static_cast<unsigned char>(text[i])) ||
                                 text[i] == '_' || text[i] == '-'))
        s += text[i++];
      push(Token::Word, std::move(s));
    } else {
      fail(line, std::string("unexpected character '") + c + "'");
    }
  }
  out.push_back({Token::End, "", line});
  return out;
}

// ---------------------------------------------------------------------------
// Generic node tree
// ---------------------------------------------------------------------------

struct Node;
struct Entry {
  std::string key;
  int line = 1;
  std::shared_ptr<Node> value;
};

struct Node {
  enum Kind { Section, Scalar, Vector, Matrix } kind = Section;
  int line = 1;
  std::vector<Entry> entries;                     // Section
  std::string scalar;                             // Scalar (word/number/string)
  std::vector<double> vec;                        // Vector
  std::vector<std::vector<double>> mat;           // Matrix
};

class Parser {
 public:
  explicit Parser(std::vector<Token> tokens) : tokens_(std::move(tokens)) {}

  Node parse_document() {
    Node root;
    root.kind = Node::Section;
    while (peek().kind != Token::End) root.entries.push_back(parse_entry());
    return root;
  }

 private:
  const Token& peek() const { return tokens_[pos_]; }
  Token next() { return tokens_[pos_++]; }

  Entry parse_entry() {
    const Token key = next();
    if (key.kind != Token::Word) fail(key.line, "expected a key, got '" + key.text + "'");
    Entry e;
    e.key = key.text;
    e.line = key.line;
    if (peek().kind == Token::OpenBrace) {
      next();
      auto node = std::make_shared<Node>();
      node->kind = Node::Section;
      node->line = key.line;
      while (peek().kind != Token::CloseBrace) {
        if (peek().kind == Token::End) fail(key.line, "unterminated section '" + key.text + "'");
        node->entries.push_back(parse_entry());
      }
      next();
      e.value = std::move(node);
      return e;
    }
    if (peek().kind != Token::Equals)
      fail(key.line, "expected '=' or '{' after key '" + key.text + "'");
    next();
    e.value = std::make_shared<Node>(parse_value());
    return e;
  }

  double parse_number_token(const Token& t) {
    double v = 0.0;
    const auto res = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
    if (res.ec != std::errc{} || res.ptr != t.text.data() + t.text.size())
      fail(t.line, "malformed number '" + t.text + "'");
    return v;
  }

  std::vector<double> parse_number_list(int line) {
    // after the opening '['
    std::vector<double> out;
    while (true) {
      const Token& t = peek();
      if (t.kind == Token::CloseBracket) {
        next();
        return out;
      }
      if (t.kind == Token::Comma) {
        next();
        continue;
      }
      if (t.kind != Token::Number) fail(t.line, "expected a number in list");
      out.push_back(parse_number_token(next()));
      (void)line;
    }
  }

  Node parse_value() {
    Node node;
    const Token& t = peek();
    node.line = t.line;
    if (t.kind == Token::Word || t.kind == Token::String || t.kind == Token::Number) {
      node.kind = Node::Scalar;
      node.scalar = next().text;
      return node;
    }
    if (t.kind != Token::OpenBracket) fail(t.line, "expected a value");
    next();
    if (peek().kind == Token::OpenBracket) {
      node.kind = Node::Matrix;
      while (true) {
        const Token& u = peek();
        if (u.kind == Token::CloseBracket) {
          next();
          return node;
        }
        if (u.kind == Token::Comma) {
          next();
          continue;
        }
        if (u.kind != Token::OpenBracket) fail(u.line, "expected '[' starting a matrix row");
        next();
        node.mat.push_back(parse_number_list(u.line));
      }
    }
    node.kind = Node::Vector;
    node.vec = parse_number_list(t.line);
    return node;
  }

  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
};

// ---------------------------------------------------------------------------
// Typed cursor over a section with strict unknown-key checking
// ---------------------------------------------------------------------------

int edit_distance(const std::string& a, const std::string& b) {
  std::vector<int> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = int(j);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = int(i);
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1,
                         prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

class Cursor {
 public:
  Cursor(const Node& node, std::string path) : node_(&node), path_(std::move(path)) {
    if (node.kind != Node::Section) fail(node.line, path_ + " must be a section");
  }

  const Node* find(const std::string& key) {
    known_.push_back(key);
    for (const auto& e : node_->entries)
      if (e.key == key) {
        used_.push_back(key);
        return e.value.get();
      }
    return nullptr;
  }

  const Node& require(const std::string& key) {
    const Node* n = find(key);
    if (!n) fail(node_->line, path_ + ": missing required key '" + key + "'");
    return *n;
  }

  bool has(const std::string& key) const {
    for (const auto& e : node_->entries)
      if (e.key == key) return true;
    return false;
  }

  std::string scalar(const std::string& key, const std::string& fallback) {
    const Node* n = find(key);
    if (!n) return fallback;
    if (n->kind != Node::Scalar) fail(n->line, key_path(key) + " must be a scalar");
    return n->scalar;
  }

  double number(const std::string& key, double fallback) {
    const Node* n = find(key);
    if (!n) return fallback;
    return as_number(*n, key);
  }

  double required_number(const std::string& key) { return as_number(require(key), key); }

  long integer(const std::string& key, long fallback) {
    const Node* n = find(key);
    if (!n) return fallback;
    const double v = as_number(*n, key);
    const long i = long(v);
    if (double(i) != v) fail(n->line, key_path(key) + " must be an integer");
    return i;
  }

  bool boolean(const std::string& key, bool fallback) {
    const Node* n = find(key);
    if (!n) return fallback;
    if (n->kind != Node::Scalar || (n->scalar != "true" && n->scalar != "false"))
      fail(n->line, key_path(key) + " must be true or false");
    return n->scalar == "true";
  }

  Eigen::VectorXd vector(const std::string& key) {
    const Node& n = require(key);
    if (n.kind != Node::Vector) fail(n.line, key_path(key) + " must be a bracketed list");
    return Eigen::Map<const Eigen::VectorXd>(n.vec.data(), Eigen::Index(n.vec.size()));
  }

  Eigen::MatrixXd matrix(const std::string& key) {
    const Node& n = require(key);
    return as_matrix(n, key);
  }

  bool matrix_if_present(const std::string& key, Eigen::MatrixXd& out) {
    const Node* n = find(key);
    if (!n) return false;
    out = as_matrix(*n, key);
    return true;
  }

  std::vector<int> int_list(const std::string& key, bool& present) {
    const Node* n = find(key);
    present = n != nullptr;
    if (!n) return {};
    if (n->kind != Node::Vector) fail(n->line, key_path(key) + " must be a bracketed list");
    std::vector<int> out;
    for (double v : n->vec) {
      if (double(int(v)) != v) fail(n->line, key_path(key) + " must contain integers");
      out.push_back(int(v));
    }
    return out;
  }

  const Node* section(const std::string& key) { return find(key); }

  std::vector<const Node*> repeated(const std::string& key) {
    known_.push_back(key);
    std::vector<const Node*> out;
    for (const auto& e : node_->entries)
      if (e.key == key) out.push_back(e.value.get());
    if (!out.empty()) used_.push_back(key);
    return out;
  }

  /// Every key must have been requested by one of the accessors above.
  void finish() {
    for (const auto& e : node_->entries) {
      if (std::find(known_.begin(), known_.end(), e.key) != known_.end()) continue;
      std::string best;
      int best_dist = 1 << 20;
      for (const auto& k : known_)
        if (int dist = edit_distance(e.key, k); dist < best_dist) {
          best_dist = dist;
          best = k;
        }
      std::string msg = path_ + ": unknown key '" + e.key + "'";
      if (!best.empty() && best_dist <= std::max<int>(2, int(e.key.size()) / 2))
        msg += " (did you mean '" + best + "'?)";
      fail(e.line, msg);
    }
  }

 private:
  std::string key_path(const std::string& key) const { return path_ + "." + key; }

  double as_number(const Node& n, const std::string& key) {
    if (n.kind != Node::Scalar) fail(n.line, key_path(key) + " must be a number");
    double v = 0.0;
    const auto res = std::from_chars(n.scalar.data(), n.scalar.data() + n.scalar.size(), v);
    if (res.ec != std::errc{} || res.ptr != n.scalar.data() + n.scalar.size())
      fail(n.line, key_path(key) + ": malformed number '" + n.scalar + "'");
    return v;
  }

  Eigen::MatrixXd as_matrix(const Node& n, const std::string& key) {
    if (n.kind != Node::Matrix || n.mat.empty())
      fail(n.line, key_path(key) + " must be a row-list matrix [[..],[..]]");
    const std::size_t cols = n.mat.front().size();
    Eigen::MatrixXd out(Eigen::Index(n.mat.size()), Eigen::Index(cols));
    for (std::size_t i = 0; i < n.mat.size(); ++i) {
      if (n.mat[i].size() != cols) fail(n.line, key_path(key) + ": ragged matrix rows");
      for (std::size_t j = 0; j < cols; ++j) out(Eigen::Index(i), Eigen::Index(j)) = n.mat[i][j];
    }
    return out;
  }

  const Node* node_;
  std::string path_;
  std::vector<std::string> known_;
  std::vector<std::string> used_;
};

// ---------------------------------------------------------------------------
// Section translators
// ---------------------------------------------------------------------------

DistributionSpec parse_distribution(const Node& node, const std::string& path) {
  Cursor cur(node, path);
  const Node* gaussian = cur.section("gaussian");
  const Node* mixture = cur.section("mixture");
  cur.finish();
  if ((gaussian != nullptr) == (mixture != nullptr))
    fail(node.line, path + ": specify exactly one of 'gaussian' or 'mixture'");
  if (gaussian) {
    Cursor g(*gaussian, path + ".gaussian");
    Eigen::VectorXd mean = g.vector("mean");
    Eigen::MatrixXd cov = g.matrix("cov");
    g.finish();
    return DistributionSpec::gaussian(std::move(mean), std::move(cov));
  }
  Cursor m(*mixture, path + ".mixture");
  std::vector<GaussianComponent> comps;
  for (const Node* comp : m.repeated("component")) {
    Cursor c(*comp, path + ".mixture.component");
    GaussianComponent gc;
    gc.weight = c.required_number("weight");
    gc.mean = c.vector("mean");
    gc.cov = c.matrix("cov");
    c.finish();
    comps.push_back(std::move(gc));
  }
  m.finish();
  if (comps.empty()) fail(mixture->line, path + ".mixture: needs at least one component");
  return DistributionSpec::mixture(std::move(comps));
}

ProblemSpec parse_problem(const Node& node) {
  Cursor cur(node, "problem");
  ProblemSpec spec;
  spec.d_x = int(cur.integer("d_x", 0));
  if (spec.d_x < 1) fail(node.line, "problem.d_x is required and must be >= 1");
  spec.d_u = int(cur.integer("d_u", spec.d_x));
  spec.horizon = cur.required_number("horizon");

  Eigen::MatrixXd m;
  spec.sigma = cur.matrix_if_present("sigma", m) ? m
                                                 : Eigen::MatrixXd::Zero(spec.d_x, spec.d_x);
  spec.r = cur.matrix_if_present("r", m) ? m : Eigen::MatrixXd::Identity(spec.d_u, spec.d_u);
  if (cur.matrix_if_present("g", m)) spec.g = m;

  const std::string drift = cur.scalar("drift", "zero");
  if (drift == "zero") {
    spec.drift = DriftKind::Zero;
  } else if (drift == "linear") {
    spec.drift = DriftKind::Linear;
    spec.drift_matrix = cur.matrix("drift_a");
  } else if (drift == "langevin") {
    spec.drift = DriftKind::Langevin;
  } else {
    fail(node.line, "problem.drift must be one of zero, linear, langevin");
  }

  const Node* pi0 = cur.section("pi0");
  const Node* piT = cur.section("piT");
  if (!pi0) fail(node.line, "problem.pi0 is required");
  if (!piT) fail(node.line, "problem.piT is required");
  spec.pi0 = parse_distribution(*pi0, "pi0");
  spec.piT = parse_distribution(*piT, "piT");
  cur.finish();
  return validate_spec(std::move(spec));
}

SolverConfig parse_solver(const Node* node, const ProblemSpec& problem) {
  SolverConfig cfg;
  if (!node) return cfg;
  Cursor cur(*node, "solver");
  cfg.n_particles = cur.integer("n_particles", cfg.n_particles);
  cfg.steps = int(cur.integer("steps", cfg.steps));
  cfg.seed = std::uint64_t(cur.integer("seed", 0));
  cfg.kde_bandwidth = cur.number("kde_bandwidth", 0.0);

  const std::string score = cur.scalar("score", "gaussian");
  if (score == "gaussian")
    cfg.score_method = ScoreMethod::Gaussian;
  else if (score == "kde")
    cfg.score_method = ScoreMethod::Kde;
  else
    fail(node->line, "solver.score must be gaussian or kde");

  const std::string gauge = cur.scalar("gauge", "natural");
  if (gauge == "natural")
    cfg.gauge = GaugeMode::Natural;
  else if (gauge == "zero")
    cfg.gauge = GaugeMode::Zero;
  else
    fail(node->line, "solver.gauge must be natural or zero");

  const std::string mode = cur.scalar("mode", "meanfield");
  if (mode == "meanfield")
    cfg.mode = DynamicsMode::MeanField;
  else if (mode == "fbsde-ito")
    cfg.mode = DynamicsMode::FbsdeIto;
  else if (mode == "fbsde-stratonovich")
    cfg.mode = DynamicsMode::FbsdeStratonovich;
  else
    fail(node->line, "solver.mode must be meanfield, fbsde-ito, or fbsde-stratonovich");

  if (const Node* basis = cur.section("basis")) {
    Cursor b(*basis, "solver.basis");
    const std::string family = b.scalar("family", "quadratic");
    if (family == "quadratic")
      cfg.basis.family = BasisFamily::Quadratic;
    else if (family == "quadratic-rbf")
      cfg.basis.family = BasisFamily::QuadraticRbf;
    else
      fail(basis->line, "solver.basis.family must be quadratic or quadratic-rbf");
    cfg.basis.n_centers = int(b.integer("n_centers", cfg.basis.n_centers));
    cfg.basis.bandwidth = b.number("bandwidth", 0.0);
    cfg.basis.ridge = b.number("ridge", 0.0);
    cfg.basis.center_seed = std::uint64_t(b.integer("center_seed", 0));
    b.finish();
  }

  if (const Node* ipf = cur.section("ipf")) {
    Cursor p(*ipf, "solver.ipf");
    cfg.ipf.max_outer = int(p.integer("max_outer", cfg.ipf.max_outer));
    cfg.ipf.damping = p.number("damping", cfg.ipf.damping);
    cfg.ipf.tol_terminal = p.number("tol_terminal", cfg.ipf.tol_terminal);
    cfg.ipf.tol_fields = p.number("tol_fields", cfg.ipf.tol_fields);
    p.finish();
  }
  cur.finish();
  (void)problem;
  return cfg;
}

OutputConfig parse_output(const Node* node, const ProblemSpec& problem,
                          const SolverConfig& solver) {
  OutputConfig out;
  bool slices_present = false;
  bool probe_present = false;
  if (node) {
    Cursor cur(*node, "output");
    out.directory = cur.scalar("directory", "out");
    out.save_trajectory = cur.boolean("save_trajectory", true);
    out.save_fields = cur.boolean("save_fields", false);
    out.slices = cur.int_list("slices", slices_present);
    if (const Node* pg = cur.section("probe_grid")) {
      probe_present = true;
      Cursor p(*pg, "output.probe_grid");
      out.probe_grid.lo = p.required_number("lo");
      out.probe_grid.hi = p.required_number("hi");
      out.probe_grid.points = int(p.integer("points", 33));
      p.finish();
      if (!(out.probe_grid.hi > out.probe_grid.lo))
        fail(pg->line, "output.probe_grid: hi must exceed lo");
      if (out.probe_grid.points < 2) fail(pg->line, "output.probe_grid.points must be >= 2");
    }
    cur.finish();
  }
  if (!slices_present) {
    const int m = solver.steps;
    out.slices = {0, m / 4, m / 2, (3 * m) / 4, m};
    out.slices.erase(std::unique(out.slices.begin(), out.slices.end()), out.slices.end());
  }
  for (int k : out.slices)
    if (k < 0 || k > solver.steps)
      throw SpecError("output.slices: slice index " + std::to_string(k) +
                      " outside [0, " + std::to_string(solver.steps) + "]");
  if (!std::is_sorted(out.slices.begin(), out.slices.end()))
    throw SpecError("output.slices must be sorted ascending");
  if (!probe_present) {
    const Eigen::MatrixXd probes = solver_probe_grid(problem);
    out.probe_grid.lo = probes.col(0).minCoeff();
    out.probe_grid.hi = probes.col(0).maxCoeff();
    out.probe_grid.points = 33;
  }
  if (out.save_fields && problem.d_x != 1)
    throw SpecError("output.save_fields requires a 1-D problem");
  return out;
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  Parser parser(tokenize(text));
  const Node root = parser.parse_document();
  Cursor cur(root, "config");
  const Node* problem = cur.section("problem");
  const Node* solver = cur.section("solver");
  const Node* output = cur.section("output");
  cur.finish();
  if (!problem) throw SpecError("config: missing required section 'problem'");

  RunConfig cfg;
  cfg.problem = parse_problem(*problem);
  cfg.solver = parse_solver(solver, cfg.problem);
  cfg.output = parse_output(output, cfg.problem, cfg.solver);
  cfg.solver.record_slices = cfg.output.slices;
  return cfg;
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SpecError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

namespace {

void print_matrix(std::ostream& os, const Eigen::MatrixXd& m) {
  os << "[";
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    os << "[";
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      os << format_double(m(i, j)) << (j + 1 < m.cols() ? ", " : "");
    os << "]" << (i + 1 < m.rows() ? ", " : "");
  }
  os << "]";
}

void print_vector(std::ostream& os, const Eigen::VectorXd& v) {
  os << "[";
  for (Eigen::Index i = 0; i < v.size(); ++i)
    os << format_double(v[i]) << (i + 1 < v.size() ? ", " : "");
  os << "]";
}

void print_distribution(std::ostream& os, const DistributionSpec& dist,
                        const std::string& name, const char* indent) {
  os << indent << name << " {\n";
  if (dist.kind == DistKind::Gaussian) {
    os << indent << "  gaussian {\n" << indent << "    mean = ";
    print_vector(os, dist.components[0].mean);
    os << "\n" << indent << "    cov = ";
    print_matrix(os, dist.components[0].cov);
    os << "\n" << indent << "  }\n";
  } else {
    os << indent << "  mixture {\n";
    for (const auto& c : dist.components) {
      os << indent << "    component {\n";
      os << indent << "      weight = " << format_double(c.weight) << "\n";
      os << indent << "      mean = ";
      print_vector(os, c.mean);
      os << "\n" << indent << "      cov = ";
      print_matrix(os, c.cov);
      os << "\n" << indent << "    }\n";
    }
    os << indent << "  }\n";
  }
  os << indent << "}\n";
}

}  // namespace

std::string print_config(const RunConfig& config) {
  std::ostringstream os;
  const ProblemSpec& p = config.problem;
  os << "problem {\n";
  os << "  d_x = " << p.d_x << "\n";
  os << "  d_u = " << p.d_u << "\n";
  os << "  horizon = " << format_double(p.horizon) << "\n";
  os << "  sigma = ";
  print_matrix(os, p.sigma);
  os << "\n  r = ";
  print_matrix(os, p.r);
  os << "\n  g = ";
  print_matrix(os, p.g);
  os << "\n";
  switch (p.drift) {
    case DriftKind::Zero:
      os << "  drift = zero\n";
      break;
    case DriftKind::Linear:
      os << "  drift = linear\n  drift_a = ";
      print_matrix(os, p.drift_matrix);
      os << "\n";
      break;
    case DriftKind::Langevin:
      os << "  drift = langevin\n";
      break;
  }
  print_distribution(os, p.pi0, "pi0", "  ");
  print_distribution(os, p.piT, "piT", "  ");
  os << "}\n";

  const SolverConfig& s = config.solver;
  os << "solver {\n";
  os << "  n_particles = " << s.n_particles << "\n";
  os << "  steps = " << s.steps << "\n";
  os << "  seed = " << s.seed << "\n";
  os << "  score = " << (s.score_method == ScoreMethod::Gaussian ? "gaussian" : "kde") << "\n";
  os << "  kde_bandwidth = " << format_double(s.kde_bandwidth) << "\n";
  os << "  gauge = " << (s.gauge == GaugeMode::Natural ? "natural" : "zero") << "\n";
  os << "  mode = "
     << (s.mode == DynamicsMode::MeanField
             ? "meanfield"
             : s.mode == DynamicsMode::FbsdeIto ? "fbsde-ito" : "fbsde-stratonovich")
     << "\n";
  os << "  basis {\n";
  os << "    family = "
     << (s.basis.family == BasisFamily::Quadratic ? "quadratic" : "quadratic-rbf") << "\n";
  os << "    n_centers = " << s.basis.n_centers << "\n";
  os << "    bandwidth = " << format_double(s.basis.bandwidth) << "\n";
  os << "    ridge = " << format_double(s.basis.ridge) << "\n";
  os << "    center_seed = " << s.basis.center_seed << "\n";
  os << "  }\n";
  os << "  ipf {\n";
  os << "    max_outer = " << s.ipf.max_outer << "\n";
  os << "    damping = " << format_double(s.ipf.damping) << "\n";
  os << "    tol_terminal = " << format_double(s.ipf.tol_terminal) << "\n";
  os << "    tol_fields = " << format_double(s.ipf.tol_fields) << "\n";
  os << "  }\n";
  os << "}\n";

  const OutputConfig& o = config.output;
  os << "output {\n";
  os << "  directory = \"" << o.directory << "\"\n";
  os << "  save_trajectory = " << (o.save_trajectory ? "true" : "false") << "\n";
  os << "  save_fields = " << (o.save_fields ? "true" : "false") << "\n";
  os << "  slices = [";
  for (std::size_t i = 0; i < o.slices.size(); ++i)
    os << o.slices[i] << (i + 1 < o.slices.size() ? ", " : "");
  os << "]\n";
  os << "  probe_grid {\n";
  os << "    lo = " << format_double(o.probe_grid.lo) << "\n";
  os << "    hi = " << format_double(o.probe_grid.hi) << "\n";
  os << "    points = " << o.probe_grid.points << "\n";
  os << "  }\n";
  os << "}\n";
  return os.str();
}

}  // namespace otbridge
