#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "derm/backend.hpp"
#include "derm/errors.hpp"

namespace derm {

namespace fs = std::filesystem;

namespace {

// Fresh directory per request so concurrent handles never collide.
struct WorkDir {
    fs::path path;

    WorkDir() {
        std::string tmpl =
            (fs::temp_directory_path() / "derm-backend-XXXXXX").string();
        if (!mkdtemp(tmpl.data()))
            throw BackendError("cannot create backend work directory");
        path = tmpl;
    }
    ~WorkDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    WorkDir(const WorkDir&) = delete;
    WorkDir& operator=(const WorkDir&) = delete;
};

std::string read_text_tail(const fs::path& p, std::size_t limit) {
    std::ifstream in(p, std::ios::binary);
    if (!in) return {};
    std::ostringstream ss;
    ss << in.rdbuf();
    std::string s = ss.str();
    while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
    if (s.size() > limit) s = "..." + s.substr(s.size() - limit);
    return s;
}

void redirect_to_file(int fd, const fs::path& p) {
    const int file =
        open(p.string().c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    if (file >= 0) {
        dup2(file, fd);
        close(file);
    }
}

// Run the child and wait, enforcing the timeout with a 10 ms poll.
void run_child(const std::string& exe, const std::vector<std::string>& args,
               const fs::path& workdir, double timeout_secs) {
    std::vector<std::string> argv_store;
    argv_store.push_back(exe);
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    argv_store.push_back(workdir.string());
    std::vector<char*> argv;
    for (std::string& s : argv_store) argv.push_back(s.data());
    argv.push_back(nullptr);

    const pid_t pid = fork();
    if (pid < 0) throw BackendError("cannot fork backend process");
    if (pid == 0) {
        redirect_to_file(STDOUT_FILENO, workdir / "stdout.txt");
        redirect_to_file(STDERR_FILENO, workdir / "stderr.txt");
        execvp(argv[0], argv.data());
        _exit(127);
    }

    const auto deadline = std::chrono::steady_clock::now() +
                          std::chrono::duration<double>(timeout_secs);
    int status = 0;
    for (;;) {
        const pid_t r = waitpid(pid, &status, WNOHANG);
        if (r == pid) break;
        if (r < 0) throw BackendError("waitpid failed for backend process");
        if (std::chrono::steady_clock::now() >= deadline) {
            kill(pid, SIGKILL);
            waitpid(pid, &status, 0);
            std::ostringstream msg;
            msg << "backend timed out after " << timeout_secs << " seconds";
            throw BackendError(msg.str());
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }

    if (WIFSIGNALED(status))
        throw BackendError("backend process terminated by signal " +
                           std::to_string(WTERMSIG(status)));
    const int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    if (code != 0) {
        std::string msg =
            "backend process exited with code " + std::to_string(code);
        const std::string err = read_text_tail(workdir / "stderr.txt", 400);
        if (!err.empty()) msg += ": " + err;
        throw BackendError(msg);
    }
}

}  // namespace

SubprocessReply subprocess_roundtrip(const BackendHandle& handle,
                                     const Tensor& input,
                                     const std::string& task) {
    if (handle.kind() != BackendKind::Subprocess)
        throw std::invalid_argument(
            "subprocess_roundtrip: handle is not a subprocess backend");
    handle.health_check();

    WorkDir work;
    write_tensor(work.path / "input.dst", input);
    {
        nlohmann::json req;
        req["task"] = task;
        std::ofstream out(work.path / "request.json");
        out << req.dump(2) << '\n';
        if (!out) throw BackendError("cannot write backend request");
    }

    run_child(handle.exe(), handle.args(), work.path, handle.timeout_secs());

    SubprocessReply reply;
    {
        std::ifstream in(work.path / "response.json");
        if (!in)
            throw BackendError("backend response: response.json not written");
        try {
            reply.response = nlohmann::json::parse(in);
        } catch (const nlohmann::json::exception& e) {
            throw BackendError(std::string("backend response: invalid JSON: ") +
                               e.what());
        }
    }
    const fs::path out_tensor = work.path / "output.dst";
    if (fs::exists(out_tensor)) {
        try {
            reply.output = read_tensor(out_tensor);
        } catch (const DataError& e) {
            throw BackendError(
                std::string("backend response: bad output tensor: ") +
                e.what());
        }
    }
    return reply;
}

}  // namespace derm
