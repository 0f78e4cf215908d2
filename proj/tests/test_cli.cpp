#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "unfolder/io.hpp"

using namespace unfolder;
using io::Json;
namespace fs = std::filesystem;

namespace {

struct Workdir {
  fs::path dir;
  Workdir() {
    dir = fs::temp_directory_path() / ("unfolder_cli_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Workdir() { fs::remove_all(dir); }
  std::string operator/(const std::string& name) const { return (dir / name).string(); }
};

int run(const std::string& args, const std::string& stdout_file = "") {
  std::string cmd = std::string(UNFOLDER_CLI) + " " + args;
  cmd += stdout_file.empty() ? " > /dev/null" : " > " + stdout_file;
  cmd += " 2> /dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

const std::string config = std::string(UNFOLDER_CONFIG_DIR) + "/cauchy-gauss.json";

}  // namespace

TEST_CASE("simulate, response, unfold pipeline") {
  Workdir w;
  REQUIRE(run("simulate " + config + " --out " + w.dir.string()) == 0);
  CHECK(fs::exists(w / "truth.json"));
  CHECK(fs::exists(w / "measured.json"));
  CHECK(fs::exists(w / "pairs.csv"));

  REQUIRE(run("response --kernel gauss --sigma 1 --meas-from " + (w / "measured.json") +
              " --out " + (w / "response.json")) == 0);
  const Json rj = io::read_json_file(w / "response.json");
  CHECK(std::abs(rj["k_factor"].get<double>() - 1.0) < 1e-6);

  REQUIRE(run("unfold --measured " + (w / "measured.json") + " --response " + (w / "response.json") +
                  " --stop stat-frac=0.05 --truth " + (w / "truth.json") + " --out " +
                  (w / "unfolded.json") + " --trace " + (w / "trace.csv") + " --svg " +
                  (w / "plot.svg"),
              w / "stdout.txt") == 0);
  const std::string out = slurp(w / "stdout.txt");
  CHECK(out.find("stopped_at=") != std::string::npos);
  CHECK(out.find("l1_unfolded_truth=") != std::string::npos);
  CHECK(slurp(w / "trace.csv").starts_with("n,bias_bound,stat_integral,stat_fraction,syst_bound,total\n"));
  CHECK(slurp(w / "plot.svg").find("<svg") != std::string::npos);
  const Histogram h = io::histogram_from_json(io::read_json_file(w / "unfolded.json"));
  CHECK(h.unfolded());

  // byte-identical reruns
  REQUIRE(run("unfold --measured " + (w / "measured.json") + " --response " + (w / "response.json") +
              " --stop stat-frac=0.05 --truth " + (w / "truth.json") + " --out " + (w / "again.json") +
              " --trace " + (w / "again.csv") + " --svg " + (w / "again.svg")) == 0);
  CHECK(slurp(w / "again.json") == slurp(w / "unfolded.json"));
  CHECK(slurp(w / "again.csv") == slurp(w / "trace.csv"));
  CHECK(slurp(w / "again.svg") == slurp(w / "plot.svg"));

  const fs::path second = w.dir / "second";
  REQUIRE(run("simulate " + config + " --out " + second.string()) == 0);
  CHECK(slurp((second / "measured.json").string()) == slurp(w / "measured.json"));
  CHECK(slurp((second / "pairs.csv").string()) == slurp(w / "pairs.csv"));

  REQUIRE(run("pseudo " + config + " --response " + (w / "response.json") +
              " --stop fixed=2 --experiments 10 --out " + (w / "pseudo.json")) == 0);
  const Json ps = io::read_json_file(w / "pseudo.json");
  CHECK(ps["order"] == 2);
  CHECK(ps["experiments"] == 10);
  CHECK(ps["std_dev"].size() == 100);

  // response from the generated pairs
  CHECK(run("response --pairs " + (w / "pairs.csv") + " --meas-axis -10,10,100 --out " +
            (w / "mc.json")) == 0);
}

TEST_CASE("fixed=0 returns the normalized back projection") {
  Workdir w;
  Matrix<double> a(2, 2);
  a << 0.6, 0.2, 0.3, 0.7;
  const Axis axis = Axis::uniform(0.0, 2.0, 2);
  const ResponseMatrix r(axis, axis, a);
  Vector<double> g(2);
  g << 40.0, 60.0;
  io::write_json_file(w / "r.json", io::to_json(r));
  io::write_json_file(w / "g.json", io::to_json(Histogram(axis, g, g.cwiseSqrt())));
  REQUIRE(run("unfold --measured " + (w / "g.json") + " --response " + (w / "r.json") +
              " --stop fixed=0 --out " + (w / "f.json")) == 0);
  const Histogram f = io::histogram_from_json(io::read_json_file(w / "f.json"));
  const Vector<double> expected = a.transpose() * g / r.k_factor();
  CHECK((f.contents() - expected).cwiseAbs().maxCoeff() < 1e-12);

  REQUIRE(run("unfold --measured " + (w / "g.json") + " --response " + (w / "r.json") +
              " --stop min-total --out " + (w / "m.json") + " --trace " + (w / "t.csv"),
              w / "m.txt") == 0);
  std::istringstream trace(slurp(w / "t.csv"));
  std::string line;
  std::getline(trace, line);
  long best_n = -1;
  double best = std::numeric_limits<double>::infinity();
  while (std::getline(trace, line)) {
    const long n = std::stol(line.substr(0, line.find(',')));
    const double total = std::stod(line.substr(line.rfind(',') + 1));
    if (total < best) {
      best = total;
      best_n = n;
    }
  }
  CHECK(slurp(w / "m.txt").starts_with("stopped_at=" + std::to_string(best_n) + " "));

  // fold of the unit vectors reproduces the matrix columns
  Vector<double> e0(2);
  e0 << 1.0, 0.0;
  io::write_json_file(w / "e0.json", io::to_json(Histogram(axis, e0, Vector<double>::Zero(2))));
  REQUIRE(run("fold --truth " + (w / "e0.json") + " --response " + (w / "r.json") + " --out " +
              (w / "col.json")) == 0);
  const Histogram col = io::histogram_from_json(io::read_json_file(w / "col.json"));
  CHECK((col.contents() - a.col(0)).cwiseAbs().maxCoeff() < 1e-15);

  CHECK(run("invert --measured " + (w / "g.json") + " --response " + (w / "r.json") + " --out " +
            (w / "inv.json")) == 0);
  const Histogram inv = io::histogram_from_json(io::read_json_file(w / "inv.json"));
  CHECK((a * inv.contents() - g).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("exit codes") {
  Workdir w;
  const Axis axis = Axis::uniform(0.0, 2.0, 2);
  const ResponseMatrix half(axis, axis, 0.5 * Matrix<double>::Identity(2, 2));
  io::write_json_file(w / "r.json", io::to_json(half));
  io::write_json_file(w / "g.json", io::to_json(Histogram(axis, Vector<double>::Constant(2, 10.0),
                                                          Vector<double>::Constant(2, 1.0))));
  const std::string unfold = "unfold --response " + (w / "r.json") + " --out " + (w / "o.json");

  CHECK(run("") == 2);
  CHECK(run("frobnicate") == 2);
  CHECK(run(unfold + " --measured " + (w / "g.json") + " --stop sometimes") == 2);
  CHECK(run(unfold + " --measured " + (w / "missing.json") + " --stop fixed=1") == 2);
  CHECK(run("response --kernel gauss --sigma 1 --pairs x.csv --meas-axis 0,1,2 --out " +
            (w / "x.json")) == 2);
  CHECK(run("response --meas-axis 0,1,2 --out " + (w / "x.json")) == 2);

  // a valid histogram on the wrong axis is a data error
  io::write_json_file(w / "wide.json",
                      io::to_json(Histogram(Axis::uniform(0.0, 3.0, 3), Vector<double>::Ones(3),
                                            Vector<double>::Ones(3))));
  CHECK(run(unfold + " --measured " + (w / "wide.json") + " --stop fixed=1") == 3);
  CHECK(run(unfold + " --measured " + (w / "g.json") + " --stop fixed=1 --rebin 2,1") == 3);

  io::write_json_file(w / "huge.json", io::to_json(Histogram(axis, Vector<double>::Constant(2, 1e308),
                                                             Vector<double>::Constant(2, 1.0))));
  CHECK(run(unfold + " --measured " + (w / "huge.json") + " --stop fixed=5") == 4);

  CHECK(run(unfold + " --measured " + (w / "g.json") + " --stop fixed=3") == 0);
}
