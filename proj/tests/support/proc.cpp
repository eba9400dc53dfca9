#include "support/proc.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#ifndef QIB_CLI_PATH
#error "QIB_CLI_PATH must be defined to the solver binary path"
#endif

namespace testsupport {

namespace {

std::string shell_quote(const std::string& s) {
    std::string out = "'";
    for (char c : s) {
        if (c == '\'')
            out += "'\\''";
        else
            out += c;
    }
    out += "'";
    return out;
}

}  // namespace

std::filesystem::path scratch_dir() {
    static const std::filesystem::path dir = [] {
        auto d = std::filesystem::temp_directory_path() /
                 ("qib-tests-" + std::to_string(static_cast<long>(::getpid())));
        std::filesystem::create_directories(d);
        return d;
    }();
    return dir;
}

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) return {};
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ProcResult run_cli(const std::vector<std::string>& args) {
    static std::atomic<int> counter{0};
    const int id = counter++;
    const auto out_path = scratch_dir() / ("proc-" + std::to_string(id) + ".out");
    const auto err_path = scratch_dir() / ("proc-" + std::to_string(id) + ".err");

    std::string cmd = shell_quote(QIB_CLI_PATH);
    for (const auto& a : args) cmd += " " + shell_quote(a);
    cmd += " > " + shell_quote(out_path.string()) + " 2> " + shell_quote(err_path.string());

    const int raw = std::system(cmd.c_str());
    ProcResult result;
    result.exit_code = raw == -1 ? -1 : WEXITSTATUS(raw);
    result.out = slurp(out_path);
    result.err = slurp(err_path);
    std::filesystem::remove(out_path);
    std::filesystem::remove(err_path);
    return result;
}

}  // namespace testsupport
