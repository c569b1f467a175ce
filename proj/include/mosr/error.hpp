/*
 * Copyright 2026 The mosr Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef MOSR_ERROR_HPP_
#define MOSR_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace mosr {

enum class ErrorKind {
  kConfiguration,
  kValidation,
  kUnknownLabel,
  kGeneration,
  kIngestion,
  kInput,
  kTraining,
  kScoring,
  kFit,
  kMetric,
  kAggregation,
  kIo,
};

const char* ToString(ErrorKind kind);

// All library failures surface as this exception; `kind` tells callers which
// contract was violated without parsing the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(ToString(kind)) + " error: " + message),
        kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace mosr

#endif  // MOSR_ERROR_HPP_
