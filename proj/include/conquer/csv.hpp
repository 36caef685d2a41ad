#pragma once

#include "conquer/model.hpp"

#include <istream>
#include <string>
#include <vector>

namespace conquer {

struct LoadedData
{
  Dataset data;
  //! One name per design column; column 0 is "(Intercept)".
  std::vector<std::string> names;
};

//! Reads a headed CSV. The column named y_col is the response and every
//! other column becomes a covariate in file order.
LoadedData load_csv(std::istream& in, const std::string& y_col);
LoadedData load_csv_file(const std::string& path, const std::string& y_col);

} // namespace conquer
