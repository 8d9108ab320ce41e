/* Prints the PATH environment variable. */
#include "std_testcase.h"

void CWE526_Info_Exposure_Environment_Variables__basic_01_bad(void)
{
    char *path = getenv("PATH");
    printLine(path != NULL ? path : "(PATH unset)");
}

int main(void)
{
    printLine("Calling bad()...");
    CWE526_Info_Exposure_Environment_Variables__basic_01_bad();
    printLine("Finished bad()");
    return 0;
}
