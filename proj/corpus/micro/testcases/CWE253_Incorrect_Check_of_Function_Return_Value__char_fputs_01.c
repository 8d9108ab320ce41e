/* Treats a zero return from fputs as failure. */
#include "std_testcase.h"

void CWE253_Incorrect_Check_of_Function_Return_Value__char_fputs_01_bad(void)
{
    if (fputs("string\n", stdout) == 0)
    {
        printLine("fputs failed!");
    }
}

int main(void)
{
    printLine("Calling bad()...");
    CWE253_Incorrect_Check_of_Function_Return_Value__char_fputs_01_bad();
    printLine("Finished bad()");
    return 0;
}
