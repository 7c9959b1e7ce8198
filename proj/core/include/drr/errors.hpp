#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace drr {

// Root of every error thrown by the library. Callers that only need a
// diagnostic can catch this and print what().
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class FileFormatError : public Error {
 public:
  using Error::Error;
};

// --- dataset ingestion ---

class MalformedLine : public Error {
 public:
  MalformedLine(std::size_t line, const std::string& why)
      : Error("malformed line " + std::to_string(line) + ": " + why), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class DuplicateId : public Error {
 public:
  explicit DuplicateId(std::string id) : Error("duplicate id: " + id), id_(std::move(id)) {}
  const std::string& id() const noexcept { return id_; }

 private:
  std::string id_;
};

class GoldIndexOutOfRange : public Error {
 public:
  explicit GoldIndexOutOfRange(std::string id)
      : Error("gold index out of range for id: " + id), id_(std::move(id)) {}
  const std::string& id() const noexcept { return id_; }

 private:
  std::string id_;
};

class EmptyDataset : public Error {
 public:
  using Error::Error;
};

class MissingGold : public Error {
 public:
  explicit MissingGold(std::string id) : Error("no gold answer for id: " + id), id_(std::move(id)) {}
  const std::string& id() const noexcept { return id_; }

 private:
  std::string id_;
};

// --- prompting / parsing ---

class ContextLengthMismatch : public Error {
 public:
  ContextLengthMismatch(std::size_t got, int turn)
      : Error("context length " + std::to_string(got) + " does not match turn " +
              std::to_string(turn) + " (expected turn - 1)") {}
};

class UnparseableAnswer : public Error {
 public:
  UnparseableAnswer(std::string raw, const std::string& why)
      : Error("unparseable answer (" + why + ")"), raw_(std::move(raw)) {}
  const std::string& raw() const noexcept { return raw_; }

 private:
  std::string raw_;
};

// --- backends ---

// Any failure of a generation or critic backend. Distillation and inference
// treat these as per-item failures rather than aborting the run.
class BackendError : public Error {
 public:
  using Error::Error;
};

class RemoteError : public BackendError {
 public:
  // status == 0 means the request never produced an HTTP response.
  RemoteError(int status, std::string body)
      : BackendError("remote error: status " + std::to_string(status) + ": " + body),
        status_(status),
        body_(std::move(body)) {}
  int status() const noexcept { return status_; }
  const std::string& body() const noexcept { return body_; }

 private:
  int status_;
  std::string body_;
};

class FixtureMissing : public BackendError {
 public:
  FixtureMissing(std::string id, int turn)
      : BackendError("no fixture for (" + id + ", turn " + std::to_string(turn) + ")"),
        id_(std::move(id)),
        turn_(turn) {}
  const std::string& id() const noexcept { return id_; }
  int turn() const noexcept { return turn_; }

 private:
  std::string id_;
  int turn_;
};

// --- critic ---

class EmptyCorpus : public Error {
 public:
  using Error::Error;
};

class VersionMismatch : public Error {
 public:
  using Error::Error;
};

}  // namespace drr
